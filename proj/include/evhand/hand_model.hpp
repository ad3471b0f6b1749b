#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "evhand/common.hpp"

namespace evhand {

// Right hand, 16-joint kinematic tree: wrist, then (MCP, PIP, DIP) for
// thumb, index, middle, ring and pinky. Keypoints add a tip per finger.
inline constexpr int kNumFingers = 5;
inline constexpr int kNumJoints = 16;
inline constexpr int kNumKeypoints = 21;
inline constexpr int kNumVertices = 778;
inline constexpr int kShapeDim = 10;
inline constexpr int kPoseDim = 4 * kNumJoints;
inline constexpr int kParamDim = kShapeDim + kPoseDim;

inline constexpr int kWrist = 0;

/// Joint id of `level` (0 = MCP, 1 = PIP, 2 = DIP) on finger `finger`.
constexpr int joint_index(int finger, int level) { return 1 + 3 * finger + level; }
constexpr int finger_of_joint(int joint) { return joint == kWrist ? -1 : (joint - 1) / 3; }
constexpr int level_of_joint(int joint) { return joint == kWrist ? -1 : (joint - 1) % 3; }
constexpr int parent_joint(int joint) {
  if (joint == kWrist) return -1;
  return level_of_joint(joint) == 0 ? kWrist : joint - 1;
}
/// Keypoint id of `level` (0 = MCP .. 3 = tip) on finger `finger`.
constexpr int keypoint_index(int finger, int level) { return 1 + 4 * finger + level; }

/// Per-finger bone-length and thickness multipliers. Packed as the 10-vector
/// [length x5, thickness x5], which stands in for the shape coefficients.
class HandShape {
 public:
  static constexpr double kMinScale = 0.5;
  static constexpr double kMaxScale = 2.0;

  HandShape() { values_.fill(1.0); }

  HandShape(const std::array<double, kNumFingers>& length,
            const std::array<double, kNumFingers>& thickness) {
    std::copy(length.begin(), length.end(), values_.begin());
    std::copy(thickness.begin(), thickness.end(), values_.begin() + kNumFingers);
    check();
  }

  static HandShape from_flat(std::span<const double> flat) {
    if (flat.size() != kShapeDim) throw InvalidArgument("shape vector must have 10 entries");
    HandShape s;
    std::copy(flat.begin(), flat.end(), s.values_.begin());
    s.check();
    return s;
  }

  const std::array<double, kShapeDim>& to_flat() const { return values_; }

  double finger_length(int finger) const { return values_[finger]; }
  double finger_thickness(int finger) const { return values_[kNumFingers + finger]; }

  /// Scale applied to the bone leaving each joint. The wrist entry is the mean
  /// finger scale, which is how far the palm axis stretches.
  std::array<double, kNumJoints> bone_length_scales() const {
    std::array<double, kNumJoints> out{};
    double mean = 0.0;
    for (int f = 0; f < kNumFingers; ++f) mean += values_[f];
    out[kWrist] = mean / kNumFingers;
    for (int j = 1; j < kNumJoints; ++j) out[j] = values_[finger_of_joint(j)];
    return out;
  }

  bool operator==(const HandShape&) const = default;

 private:
  void check() const {
    for (double v : values_) {
      if (!(v >= kMinScale && v <= kMaxScale)) {
        throw InvalidArgument("hand shape scale outside [0.5, 2.0]");
      }
    }
  }

  std::array<double, kShapeDim> values_{};
};

struct HandPose {
  std::array<Quat, kNumJoints> joint_rotations;
  Vec3 translation = Vec3::Zero();

  HandPose() { joint_rotations.fill(Quat::Identity()); }
};

struct HandParams {
  HandShape shape;
  HandPose pose;
  double timestamp = 0.0;  // seconds
};

inline void validate(const HandParams& params) {
  if (!std::isfinite(params.timestamp)) throw InvalidArgument("hand timestamp must be finite");
  for (const Quat& q : params.pose.joint_rotations) {
    if (std::abs(q.norm() - 1.0) > 1e-9) throw InvalidArgument("joint rotation is not unit norm");
  }
  if (!params.pose.translation.allFinite()) throw InvalidArgument("translation must be finite");
}

using Face = std::array<int, 3>;
using Joints3D = std::array<Vec3, kNumKeypoints>;

struct SkinInfluence {
  int bone = 0;
  double weight = 0.0;
};

/// Shape-independent part of the mesh: faces, the capsule each vertex was
/// generated on and its blend weights.
struct HandTopology {
  struct Site {
    int bone = 0;
    double axial = 0.0;  // fraction along the bone, rings only
    int pole = 0;        // -1 start cap, +1 end cap, 0 ring vertex
    double cos_phi = 1.0;
    double sin_phi = 0.0;
  };

  std::vector<Face> faces;
  std::vector<Site> sites;
  std::vector<std::array<SkinInfluence, 2>> influences;
  /// Vertex ranges per capsule, one per bone: [begin, end).
  std::array<std::pair<int, int>, kNumJoints> segment_range{};
};

struct HandMesh {
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;
  std::shared_ptr<const HandTopology> topology;

  const std::vector<Face>& faces() const { return topology->faces; }

  /// Dense view of the sparse blend weights.
  double skinning_weight(int vertex, int bone) const {
    double w = 0.0;
    for (const auto& inf : topology->influences[vertex]) {
      if (inf.bone == bone) w += inf.weight;
    }
    return w;
  }
};

namespace detail {

struct FingerLayout {
  Vec3 mcp;
  Vec3 direction;
  std::array<double, 3> bone_lengths;  // MCP->PIP, PIP->DIP, DIP->tip
  double radius;
};

// Palm facing the camera (-z), fingers pointing to -y (up in the image).
inline const std::array<FingerLayout, kNumFingers>& finger_layouts() {
  static const std::array<FingerLayout, kNumFingers> layouts = {{
      {{-0.030, -0.025, 0.0}, Vec3(-0.6, -0.8, 0.0).normalized(), {0.040, 0.032, 0.028}, 0.0095},
      {{-0.025, -0.085, 0.0}, Vec3(-0.1, -1.0, 0.0).normalized(), {0.040, 0.024, 0.020}, 0.0085},
      {{-0.003, -0.090, 0.0}, Vec3(0.0, -1.0, 0.0), {0.044, 0.027, 0.021}, 0.0088},
      {{0.018, -0.086, 0.0}, Vec3(0.08, -1.0, 0.0).normalized(), {0.041, 0.026, 0.020}, 0.0082},
      {{0.036, -0.078, 0.0}, Vec3(0.18, -1.0, 0.0).normalized(), {0.032, 0.020, 0.018}, 0.0072},
  }};
  return layouts;
}

inline constexpr std::array<double, 3> kLevelTaper = {1.0, 0.9, 0.82};
inline constexpr int kFingerRing = 8;
inline constexpr int kFingerRings = 4;
inline constexpr int kPalmRing = 14;
inline constexpr int kPalmRings = 19;
inline constexpr double kFingerCap = 0.6;     // cap height in radii
inline constexpr double kPalmHalfThickness = 0.013;
inline constexpr double kPalmCapStart = 0.012;
inline constexpr double kPalmCapEnd = 0.010;

static_assert(kPalmRing * kPalmRings + 2 + 15 * (kFingerRing * kFingerRings + 2) == kNumVertices);

inline double palm_half_width(double axial) { return 0.030 + 0.012 * axial; }

}  // namespace detail

/// Joint rest positions (16) plus the five fingertip ends for a given shape.
struct RestSkeleton {
  std::array<Vec3, kNumJoints> joints;
  std::array<Vec3, kNumFingers> tips;

  /// Start and end of the bone leaving `bone`. The wrist bone spans the palm
  /// up to the centroid of the four non-thumb knuckles.
  std::pair<Vec3, Vec3> bone_segment(int bone) const {
    if (bone == kWrist) {
      Vec3 c = Vec3::Zero();
      for (int f = 1; f < kNumFingers; ++f) c += joints[joint_index(f, 0)];
      return {joints[kWrist], c / 4.0};
    }
    const int f = finger_of_joint(bone);
    const int lvl = level_of_joint(bone);
    const Vec3 end = lvl == 2 ? tips[f] : joints[bone + 1];
    return {joints[bone], end};
  }
};

inline RestSkeleton rest_skeleton(const HandShape& shape) {
  RestSkeleton sk;
  sk.joints[kWrist] = Vec3::Zero();
  const auto& layouts = detail::finger_layouts();
  for (int f = 0; f < kNumFingers; ++f) {
    const auto& lay = layouts[f];
    const double s = shape.finger_length(f);
    Vec3 p = s * lay.mcp;
    sk.joints[joint_index(f, 0)] = p;
    for (int lvl = 0; lvl < 3; ++lvl) {
      p = p + s * lay.bone_lengths[lvl] * lay.direction;
      if (lvl < 2) {
        sk.joints[joint_index(f, lvl + 1)] = p;
      } else {
        sk.tips[f] = p;
      }
    }
  }
  return sk;
}

namespace detail {

// Orthonormal frame (u lateral, w towards the camera side) around a bone axis.
inline std::pair<Vec3, Vec3> bone_frame(const Vec3& axis) {
  const Vec3 toward_camera(0.0, 0.0, -1.0);
  Vec3 u = axis.cross(toward_camera);
  if (u.norm() < 1e-9) u = axis.unitOrthogonal();
  u.normalize();
  return {u, u.cross(axis)};
}

inline double bone_radius(const HandShape& shape, int bone) {
  const int f = finger_of_joint(bone);
  return finger_layouts()[f].radius * kLevelTaper[level_of_joint(bone)] * shape.finger_thickness(f);
}

inline Vec3 site_position(const HandTopology::Site& site, const RestSkeleton& sk,
                          const HandShape& shape) {
  const auto [a, b] = sk.bone_segment(site.bone);
  const Vec3 d = b - a;
  const double len = d.norm();
  const Vec3 axis = d / len;
  const auto [u, w] = bone_frame(axis);
  if (site.bone == kWrist) {
    if (site.pole < 0) return a - kPalmCapStart * axis;
    if (site.pole > 0) return b + kPalmCapEnd * axis;
    return a + site.axial * d + palm_half_width(site.axial) * site.cos_phi * u +
           kPalmHalfThickness * site.sin_phi * w;
  }
  const double r = bone_radius(shape, site.bone);
  if (site.pole < 0) return a - kFingerCap * r * axis;
  if (site.pole > 0) return b + kFingerCap * r * axis;
  return a + site.axial * d + r * (site.cos_phi * u + site.sin_phi * w);
}

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const double t = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * d)).norm();
}

inline void append_capsule(HandTopology& topo, int bone, int ring, int rings) {
  const int base = static_cast<int>(topo.sites.size());
  topo.sites.push_back({bone, 0.0, -1, 1.0, 0.0});
  for (int j = 0; j < rings; ++j) {
    const double axial = static_cast<double>(j) / (rings - 1);
    for (int k = 0; k < ring; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / ring;
      topo.sites.push_back({bone, axial, 0, std::cos(phi), std::sin(phi)});
    }
  }
  topo.sites.push_back({bone, 1.0, +1, 1.0, 0.0});
  const int pole0 = base;
  const int pole1 = base + 1 + ring * rings;
  auto rv = [&](int j, int k) { return base + 1 + j * ring + (k % ring); };
  for (int k = 0; k < ring; ++k) topo.faces.push_back({pole0, rv(0, k + 1), rv(0, k)});
  for (int j = 0; j + 1 < rings; ++j) {
    for (int k = 0; k < ring; ++k) {
      topo.faces.push_back({rv(j, k), rv(j, k + 1), rv(j + 1, k + 1)});
      topo.faces.push_back({rv(j, k), rv(j + 1, k + 1), rv(j + 1, k)});
    }
  }
  for (int k = 0; k < ring; ++k) topo.faces.push_back({pole1, rv(rings - 1, k), rv(rings - 1, k + 1)});
  topo.segment_range[bone] = {base, pole1 + 1};
}

inline std::vector<int> skinning_candidates(int bone) {
  std::vector<int> out{bone};
  if (bone == kWrist) {
    for (int f = 0; f < kNumFingers; ++f) out.push_back(joint_index(f, 0));
  } else {
    out.push_back(parent_joint(bone));
    if (level_of_joint(bone) < 2) out.push_back(bone + 1);
  }
  return out;
}

inline std::shared_ptr<const HandTopology> build_topology() {
  auto topo = std::make_shared<HandTopology>();
  append_capsule(*topo, kWrist, kPalmRing, kPalmRings);
  for (int f = 0; f < kNumFingers; ++f) {
    for (int lvl = 0; lvl < 3; ++lvl) {
      append_capsule(*topo, joint_index(f, lvl), kFingerRing, kFingerRings);
    }
  }

  // Wind every face outward, judged on the default shape.
  const HandShape shape;
  const RestSkeleton sk = rest_skeleton(shape);
  std::vector<Vec3> rest(topo->sites.size());
  for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = site_position(topo->sites[i], sk, shape);
  for (Face& f : topo->faces) {
    const int bone = topo->sites[f[0]].bone;
    auto [a, b] = sk.bone_segment(bone);
    const Vec3 axis = (b - a).normalized();
    a -= 0.05 * axis;
    b += 0.05 * axis;
    const Vec3 c = (rest[f[0]] + rest[f[1]] + rest[f[2]]) / 3.0;
    const double t = std::clamp((c - a).dot(b - a) / (b - a).squaredNorm(), 0.0, 1.0);
    const Vec3 outward = c - (a + t * (b - a));
    const Vec3 n = (rest[f[1]] - rest[f[0]]).cross(rest[f[2]] - rest[f[0]]);
    if (n.dot(outward) < 0.0) std::swap(f[1], f[2]);
  }

  // Blend weights from the two nearest candidate bones, proportional to
  // inverse distance to the fourth power so capsule interiors stay rigid.
  topo->influences.resize(rest.size());
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const int bone = topo->sites[i].bone;
    std::vector<std::pair<double, int>> dist;
    for (int cand : skinning_candidates(bone)) {
      const auto [a, b] = sk.bone_segment(cand);
      dist.emplace_back(std::max(point_segment_distance(rest[i], a, b), 1e-6), cand);
    }
    std::sort(dist.begin(), dist.end());
    const double w0 = std::pow(dist[0].first, -4.0);
    const double w1 = std::pow(dist[1].first, -4.0);
    topo->influences[i] = {SkinInfluence{dist[0].second, w0 / (w0 + w1)},
                           SkinInfluence{dist[1].second, w1 / (w0 + w1)}};
  }
  return topo;
}

}  // namespace detail

inline const std::shared_ptr<const HandTopology>& hand_topology() {
  static const std::shared_ptr<const HandTopology> topo = detail::build_topology();
  return topo;
}

/// Area-weighted face normal average, renormalized.
inline std::vector<Vec3> vertex_normals(std::span<const Vec3> vertices, std::span<const Face> faces) {
  std::vector<Vec3> normals(vertices.size(), Vec3::Zero());
  for (const Face& f : faces) {
    const Vec3 n = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
    for (int v : f) normals[v] += n;
  }
  for (Vec3& n : normals) {
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3(0.0, 0.0, -1.0);
  }
  return normals;
}

inline std::vector<Vec3> rest_vertices(const HandShape& shape) {
  const auto& topo = hand_topology();
  const RestSkeleton sk = rest_skeleton(shape);
  std::vector<Vec3> out(topo->sites.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::site_position(topo->sites[i], sk, shape);
  return out;
}

inline HandMesh build_rest_mesh(const HandShape& shape) {
  HandMesh mesh;
  mesh.topology = hand_topology();
  mesh.vertices = rest_vertices(shape);
  mesh.normals = vertex_normals(mesh.vertices, mesh.topology->faces);
  return mesh;
}

/// Posed rigid transform of every bone: x -> rotation * (x - rest_origin) + origin.
struct BoneTransforms {
  std::array<Mat3, kNumJoints> rotation;
  std::array<Vec3, kNumJoints> origin;
  std::array<Vec3, kNumJoints> rest_origin;
};

inline BoneTransforms forward_kinematics(const RestSkeleton& sk, const HandPose& pose) {
  BoneTransforms bt;
  std::array<Quat, kNumJoints> global;
  for (int j = 0; j < kNumJoints; ++j) {
    const int p = parent_joint(j);
    bt.rest_origin[j] = sk.joints[j];
    if (p < 0) {
      global[j] = pose.joint_rotations[j];
      bt.origin[j] = sk.joints[j];
    } else {
      global[j] = global[p] * pose.joint_rotations[j];
      bt.origin[j] = bt.origin[p] + global[p] * (sk.joints[j] - sk.joints[p]);
    }
    bt.rotation[j] = global[j].toRotationMatrix();
  }
  for (Vec3& o : bt.origin) o += pose.translation;
  return bt;
}

/// Posed vertex positions only (no normals); the hot path for loss probes.
inline std::vector<Vec3> skin_vertices(const HandParams& params) {
  const auto& topo = hand_topology();
  const std::vector<Vec3> rest = rest_vertices(params.shape);
  const BoneTransforms bt = forward_kinematics(rest_skeleton(params.shape), params.pose);
  std::vector<Vec3> out(rest.size());
  for (std::size_t i = 0; i < rest.size(); ++i) {
    Vec3 acc = Vec3::Zero();
    for (const auto& inf : topo->influences[i]) {
      acc += inf.weight * (bt.rotation[inf.bone] * (rest[i] - bt.rest_origin[inf.bone]) + bt.origin[inf.bone]);
    }
    out[i] = acc;
  }
  return out;
}

inline HandMesh skin(const HandParams& params) {
  HandMesh mesh;
  mesh.topology = hand_topology();
  mesh.vertices = skin_vertices(params);
  mesh.normals = vertex_normals(mesh.vertices, mesh.topology->faces);
  return mesh;
}

/// Joint origins from forward kinematics plus distal capsule tips.
inline Joints3D regress_joints(const HandParams& params) {
  const RestSkeleton sk = rest_skeleton(params.shape);
  const BoneTransforms bt = forward_kinematics(sk, params.pose);
  Joints3D out;
  out[0] = bt.origin[kWrist];
  for (int f = 0; f < kNumFingers; ++f) {
    for (int lvl = 0; lvl < 3; ++lvl) out[keypoint_index(f, lvl)] = bt.origin[joint_index(f, lvl)];
    const int dip = joint_index(f, 2);
    out[keypoint_index(f, 3)] = bt.origin[dip] + bt.rotation[dip] * (sk.tips[f] - sk.joints[dip]);
  }
  return out;
}

/// Shortest-arc spherical interpolation. Returns the endpoints bit-exactly at
/// t = 0 and t = 1.
inline Quat slerp(const Quat& a, const Quat& b, double t) {
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  if (a.coeffs() == b.coeffs()) return a;
  Eigen::Vector4d qa = a.coeffs();
  Eigen::Vector4d qb = b.coeffs();
  double dot = qa.dot(qb);
  if (dot < 0.0) {
    qb = -qb;
    dot = -dot;
  }
  Eigen::Vector4d out;
  if (dot > 1.0 - 1e-12) {
    out = (1.0 - t) * qa + t * qb;
  } else {
    const double theta = std::acos(std::min(dot, 1.0));
    const double s = std::sin(theta);
    out = (std::sin((1.0 - t) * theta) / s) * qa + (std::sin(t * theta) / s) * qb;
  }
  out.normalize();
  Quat q;
  q.coeffs() = out;
  return q;
}

/// Parameters at fraction `alpha` of the way from `a` to `b`: linear in time,
/// shape and translation, slerp per joint.
inline HandParams interpolate_at(const HandParams& a, const HandParams& b, double alpha) {
  HandParams out;
  out.timestamp = (1.0 - alpha) * a.timestamp + alpha * b.timestamp;
  std::array<double, kShapeDim> flat{};
  const auto& fa = a.shape.to_flat();
  const auto& fb = b.shape.to_flat();
  for (int i = 0; i < kShapeDim; ++i) flat[i] = fa[i] + alpha * (fb[i] - fa[i]);
  out.shape = HandShape::from_flat(flat);
  for (int j = 0; j < kNumJoints; ++j) {
    out.pose.joint_rotations[j] = slerp(a.pose.joint_rotations[j], b.pose.joint_rotations[j], alpha);
  }
  out.pose.translation = a.pose.translation + alpha * (b.pose.translation - a.pose.translation);
  return out;
}

/// K+1 evenly spaced parameter sets from `a` (k = 0) to `b` (k = K).
inline std::vector<HandParams> interpolate_params(const HandParams& a, const HandParams& b, int K) {
  if (K <= 0) throw InvalidArgument("interpolation count K must be positive");
  if (!(a.timestamp < b.timestamp)) throw InvalidArgument("interpolation needs a.timestamp < b.timestamp");
  std::vector<HandParams> out;
  out.reserve(K + 1);
  for (int k = 0; k <= K; ++k) {
    if (k == 0) {
      out.push_back(a);
    } else if (k == K) {
      out.push_back(b);
    } else {
      out.push_back(interpolate_at(a, b, static_cast<double>(k) / K));
    }
  }
  return out;
}

// Flat optimisation vector: [shape (10), joint quaternions wxyz (64)].

inline VecX to_flat(const HandParams& p) {
  VecX x(kParamDim);
  const auto& s = p.shape.to_flat();
  for (int i = 0; i < kShapeDim; ++i) x[i] = s[i];
  for (int j = 0; j < kNumJoints; ++j) {
    const Quat& q = p.pose.joint_rotations[j];
    x.segment<4>(kShapeDim + 4 * j) << q.w(), q.x(), q.y(), q.z();
  }
  return x;
}

/// Inverse of to_flat. Quaternions are renormalized and shape entries clamped
/// to the valid range; translation and timestamp come from `like`.
inline HandParams from_flat(const VecX& x, const HandParams& like) {
  if (x.size() != kParamDim) throw InvalidArgument("flat parameter vector must have 74 entries");
  HandParams p = like;
  std::array<double, kShapeDim> s{};
  for (int i = 0; i < kShapeDim; ++i) s[i] = std::clamp(x[i], HandShape::kMinScale, HandShape::kMaxScale);
  p.shape = HandShape::from_flat(s);
  for (int j = 0; j < kNumJoints; ++j) {
    const auto seg = x.segment<4>(kShapeDim + 4 * j);
    Quat q(seg[0], seg[1], seg[2], seg[3]);
    const double n = q.norm();
    p.pose.joint_rotations[j] = n > 1e-12 ? Quat(q.coeffs() / n) : Quat::Identity();
  }
  return p;
}

/// Flattened quaternions of `b`, each sign-flipped to lie in the hemisphere of
/// the matching quaternion of `a`.
inline Eigen::Matrix<double, kPoseDim, 1> aligned_pose_vector(const HandPose& a, const HandPose& b) {
  Eigen::Matrix<double, kPoseDim, 1> out;
  for (int j = 0; j < kNumJoints; ++j) {
    Eigen::Vector4d qb(b.joint_rotations[j].w(), b.joint_rotations[j].x(), b.joint_rotations[j].y(),
                       b.joint_rotations[j].z());
    const Eigen::Vector4d qa(a.joint_rotations[j].w(), a.joint_rotations[j].x(), a.joint_rotations[j].y(),
                             a.joint_rotations[j].z());
    if (qa.dot(qb) < 0.0) qb = -qb;
    out.segment<4>(4 * j) = qb;
  }
  return out;
}

inline Eigen::Matrix<double, kPoseDim, 1> pose_vector(const HandPose& p) {
  Eigen::Matrix<double, kPoseDim, 1> out;
  for (int j = 0; j < kNumJoints; ++j) {
    const Quat& q = p.joint_rotations[j];
    out.segment<4>(4 * j) << q.w(), q.x(), q.y(), q.z();
  }
  return out;
}

}  // namespace evhand
