#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "evhand/camera.hpp"
#include "evhand/events.hpp"
#include "evhand/hand_model.hpp"
#include "evhand/raster.hpp"

namespace evhand {

struct SimConfig {
  double contrast_threshold = 0.2;  // log-intensity units
  TimeUs frame_dt = 500;
  double background_intensity = 0.25;
  double hand_intensity = 1.0;
  double noise_rate = 0.0;  // events per pixel per second
  std::uint64_t seed = 0;

  void validate() const {
    if (!(contrast_threshold > 0.0)) throw InvalidArgument("contrast threshold must be positive");
    if (!(background_intensity > 0.0 && hand_intensity > 0.0)) throw InvalidArgument("intensities must be positive");
    if (frame_dt < 1) throw InvalidArgument("frame_dt must be at least 1 us");
    if (!(noise_rate >= 0.0)) throw InvalidArgument("noise rate must be nonnegative");
  }
};

enum class Lighting { kFlat, kLambertian };

struct RenderedFrame {
  Grid<double> log_intensity;
  TimeUs t = 0;
  Grid<double> z_buffer;  // +inf on background
};

// Lambertian shading keeps a small ambient floor so log intensity stays finite
// on grazing surfaces.
inline constexpr double kAmbient = 0.05;

inline RenderedFrame render_background(const CameraModel& model, const SimConfig& cfg, TimeUs t = 0) {
  return {Grid<double>(model.width, model.height, 1, std::log(cfg.background_intensity)), t,
          Grid<double>(model.width, model.height, 1, std::numeric_limits<double>::infinity())};
}

/// Z-buffered triangle rendering of an arbitrary scene over a constant background.
inline RenderedFrame render(std::span<const Vec3> vertices, std::span<const Face> faces,
                            std::span<const Vec3> normals, const CameraModel& model, Lighting lighting,
                            const SimConfig& cfg, TimeUs t = 0) {
  if (!vertices.empty() &&
      std::none_of(vertices.begin(), vertices.end(), [](const Vec3& v) { return v.z() > kNearPlane; })) {
    throw Error("mesh lies entirely behind the camera");
  }
  RenderedFrame frame = render_background(model, cfg, t);
  const auto sv = project_vertices(vertices, model);
  Rasterization r = rasterize(sv, faces, model.width, model.height);
  const double flat = std::log(cfg.hand_intensity);
  Barycentric bc;
  for (int idx : r.covered) {
    const int x = idx % model.width;
    const int y = idx / model.width;
    double value = flat;
    if (lighting == Lighting::kLambertian) {
      const Face& f = faces[r.face(x, y)];
      barycentric(sv[f[0]], sv[f[1]], sv[f[2]], Vec2(x, y), bc);
      Vec3 n = Vec3::Zero();
      for (int k = 0; k < 3; ++k) n += bc.perspective[k] * normals[f[k]];
      n.normalize();
      const double cosine = n.dot(-model.ray_direction(Vec2(x, y)));
      value = std::log(cfg.hand_intensity * std::max(kAmbient, cosine));
    }
    frame.log_intensity(x, y) = value;
  }
  frame.z_buffer = std::move(r.depth);
  return frame;
}

inline RenderedFrame render(const HandMesh& mesh, const CameraModel& model, Lighting lighting, const SimConfig& cfg,
                            TimeUs t = 0) {
  return render(mesh.vertices, mesh.faces(), mesh.normals, model, lighting, cfg, t);
}

/// Ideal per-pixel threshold model over a sequence of log-intensity frames. Each
/// pixel keeps the log intensity at its last event (the reference level) and
/// fires one event per whole multiple of C the signal moves away from it.
/// Timestamps come from linear interpolation of the signal inside the step.
class ThresholdSimulator {
 public:
  explicit ThresholdSimulator(double contrast_threshold) : threshold_(contrast_threshold) {
    if (!(threshold_ > 0.0)) throw InvalidArgument("contrast threshold must be positive");
  }

  void reset(const Grid<double>& log_frame, TimeUs t) {
    reference_ = log_frame;
    last_ = log_frame;
    time_ = t;
    initialized_ = true;
  }

  bool initialized() const { return initialized_; }

  /// Appends the events fired in (previous t, t] to `out`.
  void step(const Grid<double>& log_frame, TimeUs t, std::vector<Event>& out) {
    if (!initialized_) {
      reset(log_frame, t);
      return;
    }
    if (t <= time_) throw InvalidArgument("simulator frames must advance in time");
    if (log_frame.width() != last_.width() || log_frame.height() != last_.height()) {
      throw InvalidArgument("frame size changed during simulation");
    }
    const double dt = static_cast<double>(t - time_);
    const int w = log_frame.width();
    auto ref = reference_.data();
    auto prev = last_.data();
    const auto cur = log_frame.data();
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const double delta = cur[i] - ref[i];
      // Tolerance absorbs rounding when a step lands exactly on a level.
      const auto n = static_cast<long>(std::floor(std::abs(delta) / threshold_ + 1e-9));
      if (n > 0) {
        const double sign = delta > 0.0 ? 1.0 : -1.0;
        const double span = cur[i] - prev[i];
        for (long k = 1; k <= n; ++k) {
          const double level = ref[i] + sign * threshold_ * static_cast<double>(k);
          const double frac = span != 0.0 ? std::clamp((level - prev[i]) / span, 0.0, 1.0) : 1.0;
          Event e;
          e.t = time_ + static_cast<TimeUs>(std::llround(frac * dt));
          e.x = static_cast<std::int16_t>(i % w);
          e.y = static_cast<std::int16_t>(i / w);
          e.p = static_cast<std::int8_t>(sign);
          out.push_back(e);
        }
        ref[i] += sign * threshold_ * static_cast<double>(n);
      }
      prev[i] = cur[i];
    }
    time_ = t;
  }

 private:
  double threshold_;
  Grid<double> reference_;
  Grid<double> last_;
  TimeUs time_ = 0;
  bool initialized_ = false;
};

/// Parameters at time `t` (seconds) along a time-sorted trajectory.
inline HandParams sample_trajectory(std::span<const HandParams> trajectory, double t) {
  if (t <= trajectory.front().timestamp) return trajectory.front();
  if (t >= trajectory.back().timestamp) return trajectory.back();
  const auto it = std::upper_bound(trajectory.begin(), trajectory.end(), t,
                                   [](double v, const HandParams& p) { return v < p.timestamp; });
  const HandParams& b = *it;
  const HandParams& a = *(it - 1);
  const double alpha = (t - a.timestamp) / (b.timestamp - a.timestamp);
  HandParams out = interpolate_at(a, b, alpha);
  out.timestamp = t;
  return out;
}

/// Appends uniformly placed background events at `cfg.noise_rate` over
/// [t_begin, t_end) and re-sorts.
inline void add_noise(std::vector<Event>& events, TimeUs t_begin, TimeUs t_end, int width, int height,
                      const SimConfig& cfg) {
  if (cfg.noise_rate <= 0.0 || t_end <= t_begin) return;
  std::mt19937_64 rng(cfg.seed);
  const double mean = cfg.noise_rate * width * height * us_to_s(t_end - t_begin);
  std::poisson_distribution<long> count(mean);
  std::uniform_int_distribution<TimeUs> when(t_begin, t_end - 1);
  std::uniform_int_distribution<int> px(0, width - 1);
  std::uniform_int_distribution<int> py(0, height - 1);
  std::bernoulli_distribution positive(0.5);
  const long n = count(rng);
  for (long i = 0; i < n; ++i) {
    Event e;
    e.t = when(rng);
    e.x = static_cast<std::int16_t>(px(rng));
    e.y = static_cast<std::int16_t>(py(rng));
    e.p = positive(rng) ? 1 : -1;
    events.push_back(e);
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
}

/// Renders the trajectory every `frame_dt` and runs the threshold model on the
/// frames. Output is time-sorted.
inline EventStream simulate(std::span<const HandParams> trajectory, const SimConfig& cfg, const CameraModel& model,
                            Lighting lighting = Lighting::kFlat) {
  cfg.validate();
  model.validate();
  if (trajectory.size() < 2) throw InvalidArgument("trajectory needs at least two samples");
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    if (!(trajectory[i - 1].timestamp < trajectory[i].timestamp)) {
      throw InvalidArgument("trajectory timestamps must be strictly increasing");
    }
  }
  const TimeUs t_begin = s_to_us(trajectory.front().timestamp);
  const TimeUs t_end = s_to_us(trajectory.back().timestamp);

  EventStream stream;
  stream.width = model.width;
  stream.height = model.height;
  ThresholdSimulator sim(cfg.contrast_threshold);
  for (TimeUs t = t_begin; t <= t_end; t += cfg.frame_dt) {
    const HandParams p = sample_trajectory(trajectory, us_to_s(t));
    const RenderedFrame frame = render(skin(p), model, lighting, cfg, t);
    sim.step(frame.log_intensity, t, stream.events);
  }
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  add_noise(stream.events, t_begin, t_end, model.width, model.height, cfg);
  return stream;
}

}  // namespace evhand
