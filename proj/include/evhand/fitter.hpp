#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "evhand/camera.hpp"
#include "evhand/events.hpp"
#include "evhand/flow.hpp"
#include "evhand/hand_model.hpp"
#include "evhand/losses.hpp"
#include "evhand/raster.hpp"
#include "evhand/warp.hpp"

namespace evhand {

enum class EdgeMode { kIweToVertex, kVertexToEvent };

inline const char* edge_mode_name(EdgeMode m) { return m == EdgeMode::kIweToVertex ? "iwe2v" : "v2e"; }

inline EdgeMode parse_edge_mode(const std::string& s) {
  if (s == "iwe2v") return EdgeMode::kIweToVertex;
  if (s == "v2e") return EdgeMode::kVertexToEvent;
  throw InvalidArgument("unknown edge mode: " + s);
}

struct FitConfig {
  double learning_rate = 0.005;
  int max_iters = 1000;
  double fd_step = 1e-3;
  EdgeMode edge_mode = EdgeMode::kIweToVertex;
  bool use_cm = false;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int K = kDefaultMeshFlowK;
  LossWeights weights;
  EdgeConfig edge;
  // Called after every loss evaluation with (iteration, estimate, loss).
  std::function<void(int, const HandParams&, double)> on_iteration;

  void validate() const {
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
    if (max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
    if (!(fd_step > 0.0)) throw InvalidArgument("fd_step must be positive");
    if (K < 1) throw InvalidArgument("K must be at least 1");
  }
};

struct FitResult {
  HandParams params;
  std::vector<double> loss_trace;
  int iterations = 0;
  int best_iteration = 0;
};

/// Gaussian noise for the flat (shape, pose) vector.
inline VecX perturbation_noise(double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidArgument("sigma must be nonnegative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  VecX out(kParamDim);
  for (int i = 0; i < kParamDim; ++i) out[i] = sigma * n(rng);
  return out;
}

/// gt with N(0, sigma) added to every shape and quaternion entry. Quaternions
/// are renormalized and shape clamped afterwards; translation is untouched.
inline HandParams perturb(const HandParams& gt, double sigma, std::uint64_t seed) {
  const VecX noise = perturbation_noise(sigma, seed);
  if (sigma == 0.0) return gt;
  return from_flat(to_flat(gt) + noise, gt);
}

/// Central differences of `loss` at `x`, one coordinate at a time.
template <typename Loss>
VecX fd_gradient(Loss&& loss, const VecX& x, double step) {
  if (!(step > 0.0)) throw InvalidArgument("fd step must be positive");
  VecX g(x.size());
  VecX probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = loss(static_cast<const VecX&>(probe));
    probe[i] = x[i] - step;
    const double down = loss(static_cast<const VecX&>(probe));
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error("non-finite loss while differentiating coordinate " + std::to_string(i));
    }
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

/// Gradient of a HandParams loss with respect to the flat (shape, pose) vector.
/// Probes go through from_flat, so perturbed quaternions are renormalized.
inline VecX fd_gradient(const std::function<double(const HandParams&)>& loss, const HandParams& at, double step) {
  return fd_gradient([&](const VecX& x) { return loss(from_flat(x, at)); }, to_flat(at), step);
}

class Adam {
 public:
  Adam(Eigen::Index dim, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(VecX::Zero(dim)), v_(VecX::Zero(dim)) {
    if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
  }

  void step(VecX& x, const VecX& grad) {
    if (grad.size() != m_.size() || x.size() != m_.size()) throw InvalidArgument("Adam dimension mismatch");
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double mh = m_[i] / c1;
      const double vh = v_[i] / c2;
      x[i] -= lr_ * mh / (std::sqrt(vh) + eps_);
    }
  }

  int steps() const { return t_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  VecX m_;
  VecX v_;
  int t_ = 0;
};

// ---------------------------------------------------------------------------
// Vertex-to-event baseline

struct VertexEventMatch {
  int vertex = 0;
  Vec2 event = Vec2::Zero();
};

/// Vertices of `mesh` whose depth agrees with the z-buffer at their pixel, or
/// that land on an uncovered pixel (silhouette rims).
inline std::vector<int> visible_vertices(const HandMesh& mesh, const CameraModel& model, double tolerance = 2e-3) {
  const auto sv = project_vertices(mesh.vertices, model);
  const Rasterization r = rasterize(sv, mesh.faces(), model.width, model.height);
  std::vector<int> out;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    if (sv[i].z <= kNearPlane) continue;
    const long x = std::lround(sv[i].px.x());
    const long y = std::lround(sv[i].px.y());
    if (x < 0 || y < 0 || x >= model.width || y >= model.height) continue;
    const double zb = r.depth(static_cast<int>(x), static_cast<int>(y));
    if (sv[i].z <= zb + tolerance) out.push_back(static_cast<int>(i));
  }
  return out;
}

/// Temporal distance scale in px: mean projected vertex displacement a -> b.
inline double vertex_event_time_scale(const HandMesh& mesh_a, const HandMesh& mesh_b, const CameraModel& model) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < mesh_b.vertices.size(); ++i) {
    if (mesh_a.vertices[i].z() <= kNearPlane || mesh_b.vertices[i].z() <= kNearPlane) continue;
    sum += (model.project_unchecked(mesh_b.vertices[i]) - model.project_unchecked(mesh_a.vertices[i])).norm();
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

/// Nearest event for each visible vertex of mesh_b. The distance is squared
/// pixel distance plus (alpha * (1 - normalized event time))^2, so events close
/// to the end of the segment are preferred.
inline std::vector<VertexEventMatch> vertex_to_event_matches(const SubSegment& seg, const HandMesh& mesh_a,
                                                             const HandMesh& mesh_b, const CameraModel& model) {
  if (seg.empty()) throw InvalidArgument("vertex-to-event matching needs events");
  const double alpha = vertex_event_time_scale(mesh_a, mesh_b, model);
  const double duration = static_cast<double>(std::max<TimeUs>(1, seg.t_end - seg.t_start));
  // Cheapest temporal cost per pixel; ties keep the first event.
  Grid<double> best_cost(seg.width, seg.height, 1, std::numeric_limits<double>::infinity());
  for (const Event& e : seg.events) {
    if (!best_cost.contains(e.x, e.y)) continue;
    const double tau = std::clamp(static_cast<double>(e.t - seg.t_start) / duration, 0.0, 1.0);
    const double c = alpha * (1.0 - tau);
    best_cost(e.x, e.y) = std::min(best_cost(e.x, e.y), c * c);
  }
  const int max_r = std::max(seg.width, seg.height);
  std::vector<VertexEventMatch> out;
  for (int vi : visible_vertices(mesh_b, model)) {
    const Vec2 p = model.project(mesh_b.vertices[vi]);
    const int cx = static_cast<int>(std::lround(p.x()));
    const int cy = static_cast<int>(std::lround(p.y()));
    double best = std::numeric_limits<double>::infinity();
    Vec2 best_px = Vec2::Zero();
    for (int r = 0; r <= max_r; ++r) {
      const double bound = std::max(0.0, r - 0.5);
      if (bound * bound > best) break;
      for (int y = cy - r; y <= cy + r; ++y) {
        const bool edge_row = (y == cy - r || y == cy + r);
        for (int x = cx - r; x <= cx + r; x += edge_row ? 1 : 2 * r) {
          if (best_cost.contains(x, y) && std::isfinite(best_cost(x, y))) {
            const double d = (Vec2(x, y) - p).squaredNorm() + best_cost(x, y);
            if (d < best) {
              best = d;
              best_px = Vec2(x, y);
            }
          }
          if (r == 0) break;
        }
      }
    }
    if (std::isfinite(best)) out.push_back({vi, best_px});
  }
  return out;
}

/// Mean squared pixel distance between matched vertices and their events.
inline double vertex_to_event_loss(std::span<const VertexEventMatch> matches, std::span<const Vec3> vertices,
                                   const CameraModel& model) {
  if (matches.empty()) return 0.0;
  double s = 0.0;
  for (const auto& m : matches) s += (model.project(vertices[m.vertex]) - m.event).squaredNorm();
  return s / static_cast<double>(matches.size());
}

inline double vertex_to_event_loss(const SubSegment& seg, const HandMesh& mesh_a, const HandMesh& mesh_b,
                                   const CameraModel& model) {
  const auto matches = vertex_to_event_matches(seg, mesh_a, mesh_b, model);
  return vertex_to_event_loss(matches, mesh_b.vertices, model);
}

// ---------------------------------------------------------------------------
// Fitting

/// Objective with correspondences frozen at `current`. Probes only re-skin the
/// hand (and re-evaluate the frozen mesh-flow layer when CM is on).
class FrozenObjective {
 public:
  FrozenObjective(const SubSegment& seg, const HandParams& prev, const HandParams& current, const FitConfig& cfg,
                  const CameraModel& model)
      : seg_(seg), prev_(prev), cfg_(cfg), model_(model) {
    const HandMesh mesh_prev = skin(prev);
    const HandMesh mesh_cur = skin(current);
    const TimeUs t0 = s_to_us(prev.timestamp);
    const TimeUs t1 = s_to_us(current.timestamp);
    if (cfg.edge_mode == EdgeMode::kIweToVertex) {
      if (!seg.empty()) {
        const FlowField flow = mesh_flow(prev, current, cfg.K, model);
        const IWE iwe = accumulate_iwe(warp_events(seg, flow, t1), seg.width, seg.height, Splat::kBilinear, t1);
        edge_ = edge_correspondence(iwe, mesh_prev, mesh_cur, model, cfg.edge);
      }
    } else {
      matches_ = vertex_to_event_matches(seg, mesh_prev, mesh_cur, model);
    }
    if (cfg.use_cm && !seg.empty()) {
      layer_.emplace(prev, current, cfg.K, model);
      window_ = crop_window(prev, current, model);
      t0_ = t0;
      t1_ = t1;
    }
  }

  double edge(const std::vector<Vec3>& vertices) const {
    return cfg_.edge_mode == EdgeMode::kIweToVertex ? edge_loss(edge_, vertices, model_)
                                                     : vertex_to_event_loss(matches_, vertices, model_);
  }

  double cm(const HandParams& p) const {
    if (!layer_) return 0.0;
    return -iwe_contrast(seg_, layer_->evaluate(prev_, p), t0_, t1_, window_);
  }

  double operator()(const HandParams& p) const {
    const auto& w = cfg_.weights;
    double loss = w.lambda_edge * edge(skin_vertices(p)) + w.lambda_smooth * smooth_term(prev_, p, w);
    if (layer_) loss += w.lambda_cm * cm(p);
    return loss;
  }

  std::size_t correspondences() const {
    return cfg_.edge_mode == EdgeMode::kIweToVertex ? edge_.size() : matches_.size();
  }

 private:
  const SubSegment& seg_;
  HandParams prev_;
  FitConfig cfg_;
  CameraModel model_;
  std::vector<EdgeCorrespondence> edge_;
  std::vector<VertexEventMatch> matches_;
  std::optional<MeshFlowLayer> layer_;
  PixelWindow window_;
  TimeUs t0_ = 0;
  TimeUs t1_ = 0;
};

/// Adam over finite-difference gradients of
/// lambda_edge * edge + lambda_smooth * smooth (+ lambda_cm * cm), with
/// correspondences refreshed from the current estimate every iteration.
/// `prev` is the fixed estimate at the start of the segment; `init` carries the
/// end time. Returns the lowest-loss iterate.
inline FitResult fit(const SubSegment& seg, const HandParams& init, const HandParams& prev, const FitConfig& cfg,
                     const CameraModel& model) {
  cfg.validate();
  validate(init);
  validate(prev);
  FitResult result;
  result.params = init;
  HandParams current = init;
  VecX x = to_flat(init);
  Adam adam(kParamDim, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iters; ++it) {
    const FrozenObjective objective(seg, prev, current, cfg, model);
    const double loss = objective(current);
    result.loss_trace.push_back(loss);
    result.iterations = it + 1;
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "fit diverged at iteration " << it << "; loss trace:";
      for (double l : result.loss_trace) msg << ' ' << l;
      throw Error(msg.str());
    }
    if (cfg.on_iteration) cfg.on_iteration(it, current, loss);
    if (loss < best) {
      best = loss;
      result.params = current;
      result.best_iteration = it;
    }
    const VecX g = fd_gradient([&](const VecX& probe) { return objective(from_flat(probe, current)); }, x,
                               cfg.fd_step);
    adam.step(x, g);
    current = from_flat(x, init);
    x = to_flat(current);
  }
  return result;
}

}  // namespace evhand
