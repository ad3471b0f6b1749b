#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "evhand/camera.hpp"
#include "evhand/hand_model.hpp"

namespace evhand {

inline constexpr int kPalmKeypoint = 9;  // middle finger MCP

/// Root-aligned mean per-joint position error. Joints in metres, result in mm.
inline double mpjpe(const Joints3D& pred, const Joints3D& gt) {
  double s = 0.0;
  for (int i = 0; i < kNumKeypoints; ++i) s += ((pred[i] - pred[kWrist]) - (gt[i] - gt[kWrist])).norm();
  return 1000.0 * s / kNumKeypoints;
}

inline Eigen::Matrix<double, 3, kNumKeypoints> joints_matrix(const Joints3D& j) {
  Eigen::Matrix<double, 3, kNumKeypoints> m;
  for (int i = 0; i < kNumKeypoints; ++i) m.col(i) = j[i];
  return m;
}

/// Similarity transform (scale, rotation, translation) that best maps `pred`
/// onto `gt` in the least-squares sense.
struct Similarity {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

inline Similarity procrustes(const Joints3D& pred, const Joints3D& gt) {
  const auto P = joints_matrix(pred);
  const auto G = joints_matrix(gt);
  const Vec3 mp = P.rowwise().mean();
  const Vec3 mg = G.rowwise().mean();
  const Eigen::Matrix<double, 3, kNumKeypoints> Pc = P.colwise() - mp;
  const Eigen::Matrix<double, 3, kNumKeypoints> Gc = G.colwise() - mg;
  const double var_p = Pc.squaredNorm();
  if (!(var_p > 1e-24) || !(Gc.squaredNorm() > 1e-24)) throw InvalidArgument("degenerate joint set for Procrustes");
  const Mat3 cov = Gc * Pc.transpose();
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  Similarity s;
  s.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  s.scale = (svd.singularValues().asDiagonal() * d).trace() / var_p;
  s.translation = mg - s.scale * s.rotation * mp;
  return s;
}

/// MPJPE after similarity Procrustes alignment, in mm.
inline double pa_mpjpe(const Joints3D& pred, const Joints3D& gt) {
  const Similarity s = procrustes(pred, gt);
  double sum = 0.0;
  for (int i = 0; i < kNumKeypoints; ++i) sum += (s.apply(pred[i]) - gt[i]).norm();
  return 1000.0 * sum / kNumKeypoints;
}

using Joints2D = std::array<Vec2, kNumKeypoints>;

inline double palm_length(const Joints2D& j) { return (j[kPalmKeypoint] - j[kWrist]).norm(); }

/// Root-aligned mean 2D error divided by the gt palm length.
inline double mpjpe2d(const Joints2D& pred, const Joints2D& gt) {
  const double palm = palm_length(gt);
  if (!(palm > 0.0)) throw InvalidArgument("gt palm length is zero");
  double s = 0.0;
  for (int i = 0; i < kNumKeypoints; ++i) s += ((pred[i] - pred[kWrist]) - (gt[i] - gt[kWrist])).norm();
  return s / kNumKeypoints / palm;
}

struct PckCurve {
  std::vector<double> thresholds;  // mm
  std::vector<double> fractions;
  double auc = 0.0;
};

/// Fraction of errors at or under each threshold in [0, max_mm], with the AUC
/// taken by the trapezoid rule on the threshold axis scaled to [0, 1].
inline PckCurve pck_auc(std::span<const double> errors_mm, double max_mm = 100.0, double step_mm = 1.0) {
  if (!(max_mm > 0.0 && step_mm > 0.0)) throw InvalidArgument("PCK range must be positive");
  PckCurve c;
  const int n = static_cast<int>(std::llround(max_mm / step_mm));
  for (int i = 0; i <= n; ++i) {
    const double t = i * step_mm;
    std::size_t hit = 0;
    for (double e : errors_mm) hit += e <= t;
    c.thresholds.push_back(t);
    c.fractions.push_back(errors_mm.empty() ? 0.0 : static_cast<double>(hit) / errors_mm.size());
  }
  for (int i = 0; i < n; ++i) c.auc += 0.5 * (c.fractions[i] + c.fractions[i + 1]) / n;
  return c;
}

struct SequenceMetrics {
  double mpjpe_mm = 0.0;
  double pa_mpjpe_mm = 0.0;
  double mpjpe2d = 0.0;     // palm-normalized
  double mpjpe2d_px = 0.0;  // normalized value times mean gt palm length
  double mean_palm_px = 0.0;
  PckCurve pck;
  std::size_t frames = 0;
};

/// Frame-averaged metrics over paired pose sequences. PCK uses every per-joint
/// root-aligned error.
inline SequenceMetrics evaluate_sequence(std::span<const HandParams> pred, std::span<const HandParams> gt,
                                         const CameraModel& model) {
  if (pred.size() != gt.size()) throw InvalidArgument("pred and gt sequences differ in length");
  if (pred.empty()) throw InvalidArgument("no frames to evaluate");
  SequenceMetrics m;
  std::vector<double> joint_errors;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    const Joints3D jp = regress_joints(pred[f]);
    const Joints3D jg = regress_joints(gt[f]);
    m.mpjpe_mm += mpjpe(jp, jg);
    m.pa_mpjpe_mm += pa_mpjpe(jp, jg);
    const Joints2D pp = project_joints(jp, model);
    const Joints2D pg = project_joints(jg, model);
    m.mpjpe2d += mpjpe2d(pp, pg);
    m.mean_palm_px += palm_length(pg);
    for (int i = 0; i < kNumKeypoints; ++i) {
      joint_errors.push_back(1000.0 * ((jp[i] - jp[kWrist]) - (jg[i] - jg[kWrist])).norm());
    }
  }
  const double n = static_cast<double>(pred.size());
  m.frames = pred.size();
  m.mpjpe_mm /= n;
  m.pa_mpjpe_mm /= n;
  m.mpjpe2d /= n;
  m.mean_palm_px /= n;
  m.mpjpe2d_px = m.mpjpe2d * m.mean_palm_px;
  m.pck = pck_auc(joint_errors);
  return m;
}

/// PCK curve as a standalone SVG line plot.
inline std::string pck_svg(const PckCurve& c) {
  constexpr double W = 480, H = 360, L = 60, R = 20, T = 30, B = 50;
  const double pw = W - L - R;
  const double ph = H - T - B;
  const double tmax = c.thresholds.empty() ? 1.0 : c.thresholds.back();
  auto px = [&](double t) { return L + pw * t / tmax; };
  auto py = [&](double f) { return T + ph * (1.0 - f); };
  std::ostringstream s;
  char buf[128];
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<g stroke=\"#888\" stroke-width=\"0.5\">\n";
  for (int i = 0; i <= 10; ++i) {
    const double t = tmax * i / 10.0;
    std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\"/>\n", px(t), py(0), px(t),
                  py(1));
    s << buf;
    std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\"/>\n", px(0), py(i / 10.0),
                  px(tmax), py(i / 10.0));
    s << buf;
  }
  s << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
  for (int i = 0; i <= 10; i += 2) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%g</text>\n",
                  px(tmax * i / 10.0), py(0) + 16, tmax * i / 10.0);
    s << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.1f</text>\n", px(0) - 6,
                  py(i / 10.0) + 4, i / 10.0);
    s << buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">threshold (mm)</text>\n",
                L + pw / 2, H - 12);
  s << buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"14\" y=\"%.1f\" text-anchor=\"middle\" transform=\"rotate(-90 14 %.1f)\">PCK</text>\n",
                T + ph / 2, T + ph / 2);
  s << buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"20\" text-anchor=\"middle\">PCK (AUC %.3f)</text>\n",
                L + pw / 2, c.auc);
  s << buf << "</g>\n";
  s << "<polyline fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", px(c.thresholds[i]), py(c.fractions[i]));
    s << buf;
  }
  s << "\"/>\n</svg>\n";
  return s.str();
}

inline void write_pck_svg(const std::string& path, const PckCurve& c) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write plot: " + path);
  out << pck_svg(c);
}

}  // namespace evhand
