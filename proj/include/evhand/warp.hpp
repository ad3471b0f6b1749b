#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "evhand/events.hpp"
#include "evhand/flow.hpp"
#include "evhand/grid.hpp"

namespace evhand {

struct WarpedEvent {
  double x = 0.0;
  double y = 0.0;
  int p = 1;
};

/// Transports every event along the flow at its own pixel to time `t_hat`.
/// Positions may fall outside the sensor.
inline std::vector<WarpedEvent> warp_events(const SubSegment& seg, const FlowField& flow, TimeUs t_hat) {
  std::vector<WarpedEvent> out;
  out.reserve(seg.events.size());
  for (const Event& e : seg.events) {
    const double dt = us_to_s(t_hat - e.t);
    double fx = 0.0;
    double fy = 0.0;
    if (flow.flow.contains(e.x, e.y)) {
      fx = flow.flow(e.x, e.y, 0);
      fy = flow.flow(e.x, e.y, 1);
    }
    out.push_back({e.x + fx * dt, e.y + fy * dt, e.p});
  }
  return out;
}

enum class Splat { kNearest, kBilinear };

struct IWE {
  Grid<double> grid;  // 2 channels, + then -
  TimeUs t_ref = 0;

  double total() const {
    double s = 0.0;
    for (double v : grid.data()) s += v;
    return s;
  }
};

/// Counts warped events per pixel and polarity. Nearest rounds to the closest
/// pixel; bilinear spreads each event over its four neighbours. Mass landing
/// outside the sensor is dropped.
inline IWE accumulate_iwe(std::span<const WarpedEvent> warped, int width, int height, Splat mode,
                          TimeUs t_ref = 0) {
  IWE iwe{Grid<double>(width, height, 2, 0.0), t_ref};
  for (const WarpedEvent& e : warped) {
    const int c = polarity_channel(e.p);
    if (!std::isfinite(e.x) || !std::isfinite(e.y)) continue;
    if (mode == Splat::kNearest) {
      const long x = std::lround(e.x);
      const long y = std::lround(e.y);
      if (x >= 0 && y >= 0 && x < width && y < height) iwe.grid(static_cast<int>(x), static_cast<int>(y), c) += 1.0;
      continue;
    }
    if (e.x <= -1.0 || e.y <= -1.0 || e.x >= width || e.y >= height) continue;
    for (const auto& [px, w] : bilinear_splat_weights(Vec2(e.x, e.y))) {
      if (w > 0.0 && iwe.grid.contains(px.x(), px.y())) iwe.grid(px.x(), px.y(), c) += w;
    }
  }
  return iwe;
}

/// Population variance (1/N) sum (h - mean)^2.
inline double variance(std::span<const double> image) {
  if (image.empty()) return 0.0;
  const double n = static_cast<double>(image.size());
  double mean = 0.0;
  for (double v : image) mean += v;
  mean /= n;
  double acc = 0.0;
  for (double v : image) acc += (v - mean) * (v - mean);
  return acc / n;
}

/// Variance of one channel restricted to a pixel window.
inline double window_variance(const Grid<double>& grid, int channel, const PixelWindow& w) {
  if (w.empty()) return 0.0;
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(w.width()) * w.height());
  for (int y = w.y0; y < w.y1; ++y) {
    for (int x = w.x0; x < w.x1; ++x) vals.push_back(grid(x, y, channel));
  }
  return variance(vals);
}

/// Per-polarity variance inside the window, summed over both channels.
inline double iwe_variance(const IWE& iwe, const PixelWindow& w) {
  return window_variance(iwe.grid, 0, w) + window_variance(iwe.grid, 1, w);
}

inline PixelWindow full_window(int width, int height) { return {0, 0, width, height}; }

}  // namespace evhand
