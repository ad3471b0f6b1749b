#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "evhand/camera.hpp"
#include "evhand/events.hpp"
#include "evhand/flow.hpp"
#include "evhand/hand_model.hpp"
#include "evhand/warp.hpp"

namespace evhand {

struct LossWeights {
  // supervision
  double lambda_beta = 0.25;
  double lambda_theta = 5.0;
  double lambda_3d = 1000.0;
  double lambda_mano = 0.1;
  // weak supervision
  double lambda_cm = 3.0;
  double lambda_edge = 0.2;
  double lambda_smooth = 0.1;
  // overall mix
  double lambda_super = 2.0;
  double lambda_weakly = 1.0;
  // smooth loss
  double smooth_lambda_beta = 0.2;
  double smooth_lambda_theta = 1.0;
  double b_smooth = 0.5;
};

struct EdgeConfig {
  double b_orient = 1.2;
  double b_motion = 4.0;
  double b_d = 4.0;
  int neighborhood = 12;  // px, square side
  int key_pixels = 256;

  void validate() const {
    if (!(b_orient > 1.0)) throw InvalidArgument("b_orient must exceed 1");
    if (!(b_motion > 0.0)) throw InvalidArgument("b_motion must be positive");
    if (key_pixels <= 0 || neighborhood <= 0) throw InvalidArgument("edge config counts must be positive");
  }
};

// ---------------------------------------------------------------------------
// Contrast maximisation

/// Crop window used for every IWE statistic of the segment a -> b.
inline PixelWindow crop_window(const HandParams& a, const HandParams& b, const CameraModel& model) {
  return bbox_for_subsegment(regress_joints(a), regress_joints(b), model).window(model.width, model.height);
}

/// Sum of forward (to t_end) and backward (to t_start) IWE variances.
inline double iwe_contrast(const SubSegment& seg, const FlowField& flow, TimeUs t_start, TimeUs t_end,
                           const PixelWindow& window, Splat mode = Splat::kBilinear) {
  double total = 0.0;
  for (TimeUs t_ref : {t_end, t_start}) {
    const auto warped = warp_events(seg, flow, t_ref);
    total += iwe_variance(accumulate_iwe(warped, seg.width, seg.height, mode, t_ref), window);
  }
  return total;
}

/// Negative forward plus backward IWE contrast under the mesh flow of a -> b.
inline double cm_loss(const SubSegment& seg, const HandParams& a, const HandParams& b, int K,
                      const CameraModel& model, Splat mode = Splat::kBilinear) {
  if (seg.empty()) return 0.0;
  const FlowField flow = mesh_flow(a, b, K, model);
  return -iwe_contrast(seg, flow, s_to_us(a.timestamp), s_to_us(b.timestamp), crop_window(a, b, model), mode);
}

// ---------------------------------------------------------------------------
// Hand-edge loss

/// b_orient - |cos(normal, camera ray)|.
inline double orientation_weight(const Vec3& normal, const Vec3& vertex, double b_orient) {
  const double denom = normal.norm() * vertex.norm();
  const double c = denom > 0.0 ? normal.dot(vertex) / denom : 0.0;
  return b_orient - std::abs(c);
}

/// sqrt(|projected displacement|^2 + b_motion).
inline double motion_weight(const Vec2& from, const Vec2& to, double b_motion) {
  return std::sqrt((to - from).squaredNorm() + b_motion);
}

inline double correspondence_metric(double w_o, double w_m, const Vec2& projected, const Vec2& key, double b_d) {
  return w_o * w_m / ((projected - key).squaredNorm() + b_d);
}

struct EdgeCorrespondence {
  Vec2 key = Vec2::Zero();
  int vertex = 0;
  double w_o = 0.0;
  double w_m = 0.0;
  double metric = 0.0;
};

/// The (up to) M pixels with the largest combined-polarity mass, largest first.
inline std::vector<int> select_key_pixels(const IWE& iwe, int count) {
  const auto pos = iwe.grid.channel(0);
  const auto neg = iwe.grid.channel(1);
  std::vector<std::pair<double, int>> mass;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double m = pos[i] + neg[i];
    if (m > 0.0) mass.emplace_back(m, static_cast<int>(i));
  }
  const auto n = std::min<std::size_t>(mass.size(), static_cast<std::size_t>(count));
  std::partial_sort(mass.begin(), mass.begin() + n, mass.end(), [](const auto& l, const auto& r) {
    return l.first != r.first ? l.first > r.first : l.second < r.second;
  });
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = mass[i].second;
  return out;
}

/// Matches each key pixel of the IWE (taken at mesh_b's time) with the vertex
/// of mesh_b that maximises orientation x motion weight over squared distance,
/// among vertices projecting inside the pixel's neighbourhood.
inline std::vector<EdgeCorrespondence> edge_correspondence(const IWE& iwe, const HandMesh& mesh_a,
                                                           const HandMesh& mesh_b, const CameraModel& model,
                                                           const EdgeConfig& cfg = {}) {
  cfg.validate();
  const std::size_t nv = mesh_b.vertices.size();
  std::vector<Vec2> pb(nv);
  std::vector<double> wo(nv);
  std::vector<double> wm(nv);
  std::vector<bool> usable(nv, false);
  for (std::size_t i = 0; i < nv; ++i) {
    const Vec3& vb = mesh_b.vertices[i];
    const Vec3& va = mesh_a.vertices[i];
    if (vb.z() <= kNearPlane || va.z() <= kNearPlane) continue;
    usable[i] = true;
    pb[i] = model.project_unchecked(vb);
    wo[i] = orientation_weight(mesh_b.normals[i], vb, cfg.b_orient);
    wm[i] = motion_weight(model.project_unchecked(va), pb[i], cfg.b_motion);
  }
  const double half = 0.5 * cfg.neighborhood;
  std::vector<EdgeCorrespondence> out;
  for (int idx : select_key_pixels(iwe, cfg.key_pixels)) {
    const Vec2 key(idx % iwe.grid.width(), idx / iwe.grid.width());
    EdgeCorrespondence best;
    best.vertex = -1;
    for (std::size_t i = 0; i < nv; ++i) {
      if (!usable[i]) continue;
      const Vec2 d = pb[i] - key;
      if (std::abs(d.x()) > half || std::abs(d.y()) > half) continue;
      const double m = correspondence_metric(wo[i], wm[i], pb[i], key, cfg.b_d);
      if (m > best.metric) best = {key, static_cast<int>(i), wo[i], wm[i], m};
    }
    if (best.vertex >= 0) out.push_back(best);
  }
  return out;
}

/// Weighted mean squared pixel distance between matched vertices and key
/// pixels, normalised by the surviving weight mass. Zero when nothing matched.
inline double edge_loss(std::span<const EdgeCorrespondence> corrs, std::span<const Vec3> vertices,
                        const CameraModel& model) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& c : corrs) {
    const double w = c.w_o * c.w_m;
    num += w * (model.project(vertices[c.vertex]) - c.key).squaredNorm();
    den += w;
  }
  return den > 0.0 ? num / den : 0.0;
}

inline double edge_loss(std::span<const EdgeCorrespondence> corrs, const HandMesh& mesh_b, const CameraModel& model) {
  return edge_loss(corrs, mesh_b.vertices, model);
}

// ---------------------------------------------------------------------------
// Smooth loss

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double shape_distance_sq(const HandShape& a, const HandShape& b) {
  double s = 0.0;
  for (int i = 0; i < kShapeDim; ++i) {
    const double d = a.to_flat()[i] - b.to_flat()[i];
    s += d * d;
  }
  return s;
}

/// Squared distance between flattened quaternions after per-joint sign alignment.
inline double pose_distance_sq(const HandPose& a, const HandPose& b) {
  return (aligned_pose_vector(a, b) - pose_vector(a)).squaredNorm();
}

inline double smooth_term(const HandParams& prev, const HandParams& cur, const LossWeights& w = {}) {
  const double x = w.smooth_lambda_beta * shape_distance_sq(prev.shape, cur.shape) +
                   w.smooth_lambda_theta * pose_distance_sq(prev.pose, cur.pose) - w.b_smooth;
  return sigmoid(std::max(0.0, x));
}

inline std::vector<double> smooth_terms(std::span<const HandParams> seq, const LossWeights& w = {}) {
  std::vector<double> out;
  for (std::size_t i = 1; i < seq.size(); ++i) out.push_back(smooth_term(seq[i - 1], seq[i], w));
  return out;
}

inline double smooth_loss(std::span<const HandParams> seq, const LossWeights& w = {}) {
  double s = 0.0;
  for (double t : smooth_terms(seq, w)) s += t;
  return s;
}

// ---------------------------------------------------------------------------
// Supervision

/// Squared norm of the stacked 63-vector difference.
inline double joint_loss(const Joints3D& pred, const Joints3D& gt) {
  double s = 0.0;
  for (int i = 0; i < kNumKeypoints; ++i) s += (pred[i] - gt[i]).squaredNorm();
  return s;
}

inline double mano_loss(const HandParams& pred, const HandParams& gt, const LossWeights& w = {}) {
  return w.lambda_beta * shape_distance_sq(gt.shape, pred.shape) + w.lambda_theta * pose_distance_sq(gt.pose, pred.pose);
}

inline double supervised_loss(const HandParams& pred, const HandParams& gt, const Joints3D& gt_joints,
                              const LossWeights& w = {}) {
  return w.lambda_3d * joint_loss(regress_joints(pred), gt_joints) + w.lambda_mano * mano_loss(pred, gt, w);
}

inline double weakly_loss(double cm, double edge, double smooth, const LossWeights& w = {}) {
  return w.lambda_cm * cm + w.lambda_edge * edge + w.lambda_smooth * smooth;
}

inline double total_loss(double super, double weakly, const LossWeights& w = {}) {
  return w.lambda_super * super + w.lambda_weakly * weakly;
}

struct WeaklyTerms {
  double cm = 0.0;
  double edge = 0.0;
  double smooth = 0.0;
  double total = 0.0;
};

/// All weak-supervision terms for one sub-segment between `prev` and `cur`.
inline WeaklyTerms evaluate_weakly(const SubSegment& seg, const HandParams& prev, const HandParams& cur, int K,
                                   const CameraModel& model, const EdgeConfig& edge_cfg = {},
                                   const LossWeights& w = {}) {
  WeaklyTerms t;
  const HandMesh mesh_prev = skin(prev);
  const HandMesh mesh_cur = skin(cur);
  if (!seg.empty()) {
    const FlowField flow = mesh_flow(prev, cur, K, model);
    const TimeUs t0 = s_to_us(prev.timestamp);
    const TimeUs t1 = s_to_us(cur.timestamp);
    t.cm = -iwe_contrast(seg, flow, t0, t1, crop_window(prev, cur, model));
    const IWE iwe = accumulate_iwe(warp_events(seg, flow, t1), seg.width, seg.height, Splat::kBilinear, t1);
    t.edge = edge_loss(edge_correspondence(iwe, mesh_prev, mesh_cur, model, edge_cfg), mesh_cur, model);
  }
  t.smooth = smooth_term(prev, cur, w);
  t.total = weakly_loss(t.cm, t.edge, t.smooth, w);
  return t;
}

}  // namespace evhand
