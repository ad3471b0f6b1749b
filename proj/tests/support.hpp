#pragma once

#include <random>
#include <vector>

#include "evhand/evhand.hpp"

namespace evhand::scene {

inline Quat axis_angle(double angle, const Vec3& axis) { return Quat(Eigen::AngleAxisd(angle, axis.normalized())); }

// Roughly centred in the default 346x260 view, palm facing the camera.
inline const Vec3 kCentre(0.02, 0.085, 0.4);

inline HandParams hand_at(double t, const Vec3& translation = kCentre) {
  HandParams p;
  p.timestamp = t;
  p.pose.translation = translation;
  return p;
}

inline Quat random_rotation(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> a(-max_angle, max_angle);
  return axis_angle(a(rng), Vec3(n(rng), n(rng), n(rng)));
}

/// Plausible random parameters in front of the default camera.
inline HandParams random_params(std::mt19937_64& rng, double max_angle = 0.5) {
  std::uniform_real_distribution<double> s(0.8, 1.2);
  std::uniform_real_distribution<double> d(-0.02, 0.02);
  std::array<double, kNumFingers> len{};
  std::array<double, kNumFingers> thick{};
  for (int f = 0; f < kNumFingers; ++f) {
    len[f] = s(rng);
    thick[f] = s(rng);
  }
  HandParams p;
  p.shape = HandShape(len, thick);
  for (auto& q : p.pose.joint_rotations) q = random_rotation(rng, max_angle);
  p.pose.translation = kCentre + Vec3(d(rng), d(rng), d(rng));
  return p;
}

inline Joints3D random_joints(std::mt19937_64& rng, double scale = 0.1) {
  std::normal_distribution<double> n(0.0, scale);
  Joints3D j;
  for (auto& v : j) v = Vec3(n(rng), n(rng), n(rng) + 0.4);
  return j;
}

/// Rigid translation at constant velocity (m/s), sampled every `dt` seconds.
inline std::vector<HandParams> translating(const Vec3& velocity, double t0, double t1, double dt = 0.01,
                                           const Vec3& start = kCentre) {
  std::vector<HandParams> out;
  const int n = static_cast<int>(std::lround((t1 - t0) / dt));
  for (int i = 0; i <= n; ++i) {
    const double t = t0 + (t1 - t0) * i / n;
    out.push_back(hand_at(t, start + (t - t0) * velocity));
  }
  return out;
}

/// Index finger flexing at every joint by `rate` rad/s (curling towards the
/// palm) while the rest of the hand stays still.
inline HandParams index_curl_at(double t, double rate, double t0 = 0.0) {
  HandParams p = hand_at(t);
  for (int lvl = 0; lvl < 3; ++lvl) {
    p.pose.joint_rotations[joint_index(1, lvl)] = axis_angle(rate * (t - t0), Vec3(1.0, 0.0, 0.0));
  }
  return p;
}

inline std::vector<HandParams> index_curl(double rate, double t0, double t1, int samples = 20) {
  std::vector<HandParams> out;
  for (int i = 0; i <= samples; ++i) out.push_back(index_curl_at(t0 + (t1 - t0) * i / samples, rate, t0));
  return out;
}

/// Seeded random hand motion: drifting translation, wrist rotation about the
/// view axis plus a small tilt, and per-finger flexion with random rates.
struct RandomMotion {
  Vec3 velocity;
  double wrist_rate;
  double wrist_tilt;
  std::array<double, kNumFingers> curl0;
  std::array<double, kNumFingers> curl_rate;

  explicit RandomMotion(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    velocity = Vec3(0.3 * u(rng), 0.3 * u(rng), 0.1 * u(rng));
    wrist_rate = 2.0 * u(rng);
    wrist_tilt = 0.3 * u(rng);
    for (int f = 0; f < kNumFingers; ++f) {
      curl0[f] = 0.3 + 0.3 * u(rng);
      curl_rate[f] = 4.0 * u(rng);
    }
  }

  HandParams at(double t) const {
    HandParams p = hand_at(t, kCentre + t * velocity);
    p.pose.joint_rotations[kWrist] =
        axis_angle(wrist_rate * t, Vec3(0.0, 0.0, 1.0)) * axis_angle(wrist_tilt, Vec3(1.0, 0.0, 0.0));
    for (int f = 0; f < kNumFingers; ++f) {
      const Vec3 axis = f == 0 ? Vec3(0.0, 1.0, 0.0) : Vec3(1.0, 0.0, 0.0);
      for (int lvl = 0; lvl < 3; ++lvl) {
        const double angle = (curl0[f] + curl_rate[f] * t) * (lvl == 0 ? 0.6 : 0.8);
        p.pose.joint_rotations[joint_index(f, lvl)] = axis_angle(angle, axis);
      }
    }
    return p;
  }

  std::vector<HandParams> trajectory(double t1, int samples) const {
    std::vector<HandParams> out;
    for (int i = 0; i <= samples; ++i) out.push_back(at(t1 * i / samples));
    return out;
  }
};

}  // namespace evhand::scene
