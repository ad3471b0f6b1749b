#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace evhand {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using VecX = Eigen::VectorXd;

/// Microseconds since the start of a recording.
using TimeUs = std::int64_t;

inline double us_to_s(TimeUs t) { return static_cast<double>(t) * 1e-6; }
inline TimeUs s_to_us(double t) { return static_cast<TimeUs>(std::llround(t * 1e6)); }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed arguments that violate a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace evhand
