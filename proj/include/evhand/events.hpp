#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "evhand/common.hpp"
#include "evhand/grid.hpp"

namespace evhand {

struct Event {
  TimeUs t = 0;
  std::int16_t x = 0;
  std::int16_t y = 0;
  std::int8_t p = 1;  // +1 brightening, -1 darkening

  bool operator==(const Event&) const = default;
};

/// Channel holding a polarity in every two-channel frame: 0 for +, 1 for -.
constexpr int polarity_channel(int p) { return p > 0 ? 0 : 1; }

struct EventStream {
  std::vector<Event> events;
  int width = 346;
  int height = 260;

  /// Throws unless timestamps are non-decreasing, pixels are on the sensor and
  /// polarities are +-1.
  void validate() const {
    for (std::size_t i = 0; i < events.size(); ++i) {
      const Event& e = events[i];
      if (e.x < 0 || e.y < 0 || e.x >= width || e.y >= height) throw Error("event outside sensor");
      if (e.p != 1 && e.p != -1) throw Error("event polarity must be +1 or -1");
      if (i > 0 && e.t < events[i - 1].t) throw Error("event timestamps are not sorted");
    }
  }
};

/// Half-open time slice [t_start, t_end) of a parent stream.
struct SubSegment {
  std::span<const Event> events;
  TimeUs t_start = 0;
  TimeUs t_end = 1;
  int width = 346;
  int height = 260;

  double duration_s() const { return us_to_s(t_end - t_start); }
  bool empty() const { return events.empty(); }
};

/// Events of `stream` in [t_start, t_end).
inline SubSegment slice(const EventStream& stream, TimeUs t_start, TimeUs t_end) {
  if (!(t_start < t_end)) throw InvalidArgument("slice needs t_start < t_end");
  auto by_time = [](const Event& e, TimeUs t) { return e.t < t; };
  const auto lo = std::lower_bound(stream.events.begin(), stream.events.end(), t_start, by_time);
  const auto hi = std::lower_bound(lo, stream.events.end(), t_end, by_time);
  return {std::span<const Event>(lo, hi), t_start, t_end, stream.width, stream.height};
}

/// N contiguous equal-duration sub-segments covering [t0, tN). Boundaries are
/// rounded down to whole microseconds.
inline std::vector<SubSegment> split(const EventStream& stream, TimeUs t0, TimeUs tN, int N) {
  if (N <= 0) throw InvalidArgument("split count must be positive");
  if (!(t0 < tN)) throw InvalidArgument("split needs t0 < tN");
  if (tN - t0 < N) throw InvalidArgument("split range shorter than N microseconds");
  std::vector<SubSegment> out;
  out.reserve(N);
  const TimeUs span = tN - t0;
  for (int k = 0; k < N; ++k) {
    const TimeUs a = t0 + span * k / N;
    const TimeUs b = k + 1 == N ? tN : t0 + span * (k + 1) / N;
    out.push_back(slice(stream, a, b));
  }
  return out;
}

enum class FrameKind { kLnes, kEci, kTimeSurface };

struct EventFrame {
  Grid<double> grid;  // width x height x 2, channel per polarity
  FrameKind kind = FrameKind::kLnes;
  TimeUs t_ref = 0;
};

struct EventVolume {
  Grid<double> grid;  // one channel per temporal bin
  TimeUs t_start = 0;
  TimeUs t_end = 1;

  int bins() const { return grid.channels(); }
};

/// Latest normalized timestamp per pixel and polarity; later events overwrite.
inline EventFrame build_lnes(const SubSegment& seg) {
  EventFrame f{Grid<double>(seg.width, seg.height, 2, 0.0), FrameKind::kLnes, seg.t_end};
  const double span = static_cast<double>(seg.t_end - seg.t_start);
  for (const Event& e : seg.events) {
    f.grid(e.x, e.y, polarity_channel(e.p)) = static_cast<double>(e.t - seg.t_start) / span;
  }
  return f;
}

/// Event count image.
inline EventFrame build_eci(const SubSegment& seg) {
  EventFrame f{Grid<double>(seg.width, seg.height, 2, 0.0), FrameKind::kEci, seg.t_end};
  for (const Event& e : seg.events) f.grid(e.x, e.y, polarity_channel(e.p)) += 1.0;
  return f;
}

inline constexpr TimeUs kDefaultTimeSurfaceTau = 30000;

/// exp(-(t_end - t_last) / tau) per pixel and polarity, 0 where nothing fired.
inline EventFrame build_time_surface(const SubSegment& seg, TimeUs tau = kDefaultTimeSurfaceTau) {
  if (tau <= 0) throw InvalidArgument("time-surface tau must be positive");
  EventFrame f{Grid<double>(seg.width, seg.height, 2, 0.0), FrameKind::kTimeSurface, seg.t_end};
  for (const Event& e : seg.events) {
    f.grid(e.x, e.y, polarity_channel(e.p)) =
        std::exp(-static_cast<double>(seg.t_end - e.t) / static_cast<double>(tau));
  }
  return f;
}

inline constexpr int kDefaultVoxelBins = 5;

/// Signed voxel grid: each event's polarity is split linearly between the two
/// bins nearest its normalized time (bin k centered at k / (B - 1)).
inline EventVolume build_voxel(const SubSegment& seg, int bins = kDefaultVoxelBins) {
  if (bins < 2) throw InvalidArgument("voxel grid needs at least two bins");
  EventVolume vol{Grid<double>(seg.width, seg.height, bins, 0.0), seg.t_start, seg.t_end};
  const double span = static_cast<double>(seg.t_end - seg.t_start);
  for (const Event& e : seg.events) {
    const double ts = (bins - 1) * static_cast<double>(e.t - seg.t_start) / span;
    const int lo = std::clamp(static_cast<int>(std::floor(ts)), 0, bins - 1);
    const double frac = ts - lo;
    vol.grid(e.x, e.y, lo) += e.p * (1.0 - frac);
    if (frac > 0.0 && lo + 1 < bins) vol.grid(e.x, e.y, lo + 1) += e.p * frac;
  }
  return vol;
}

}  // namespace evhand
