#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "evhand/hand_model.hpp"

namespace evhand {

// Pose ground-truth text: one record per line,
//   t_us beta[10] quat[16 x 4, wxyz] trans[3]
// whitespace separated; '#' starts a comment.

inline std::string format_pose_record(const HandParams& p) {
  std::string line;
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    if (!line.empty()) line += ' ';
    line += buf;
  };
  // Shortest microsecond text that reads back to the same seconds value, so
  // integer-microsecond files also survive a read/write cycle unchanged.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, p.timestamp * 1e6);
    if (std::strtod(buf, nullptr) / 1e6 == p.timestamp || prec == 17) break;
  }
  line += buf;
  for (double b : p.shape.to_flat()) put(b);
  for (const Quat& q : p.pose.joint_rotations) {
    put(q.w());
    put(q.x());
    put(q.y());
    put(q.z());
  }
  for (int i = 0; i < 3; ++i) put(p.pose.translation[i]);
  return line;
}

inline HandParams parse_pose_record(const std::string& line) {
  std::istringstream ss(line);
  std::vector<double> v;
  double x = 0.0;
  while (ss >> x) v.push_back(x);
  if (!ss.eof()) throw Error("non-numeric token in pose record");
  constexpr std::size_t kFields = 1 + kShapeDim + kPoseDim + 3;
  if (v.size() != kFields) {
    throw Error("pose record has " + std::to_string(v.size()) + " fields, expected " + std::to_string(kFields));
  }
  HandParams p;
  p.timestamp = v[0] / 1e6;
  p.shape = HandShape::from_flat(std::span<const double>(v.data() + 1, kShapeDim));
  for (int j = 0; j < kNumJoints; ++j) {
    const double* q = v.data() + 1 + kShapeDim + 4 * j;
    Quat rot(q[0], q[1], q[2], q[3]);
    // Hand-written files carry few digits; full-precision records pass through untouched.
    if (std::abs(rot.norm() - 1.0) > 1e-12) rot.normalize();
    p.pose.joint_rotations[j] = rot;
  }
  const double* t = v.data() + 1 + kShapeDim + kPoseDim;
  p.pose.translation = Vec3(t[0], t[1], t[2]);
  validate(p);
  return p;
}

inline std::vector<HandParams> read_poses(std::istream& in) {
  std::vector<HandParams> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_pose_record(line));
    } catch (const Error& e) {
      throw Error("pose line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<HandParams> read_poses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open poses: " + path);
  return read_poses(in);
}

inline void write_poses(std::ostream& out, const std::vector<HandParams>& poses) {
  out << "# t_us beta[10] quat[16x4 wxyz] trans[3]\n";
  for (const auto& p : poses) out << format_pose_record(p) << '\n';
}

inline void write_poses(const std::string& path, const std::vector<HandParams>& poses) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write poses: " + path);
  write_poses(out, poses);
}

}  // namespace evhand
