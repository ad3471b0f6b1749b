#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <string>

#include "evhand/common.hpp"
#include "evhand/grid.hpp"
#include "evhand/hand_model.hpp"

namespace evhand {

/// Pinhole camera. Pixel (i, j) has its center at continuous coordinate (i, j).
struct CameraModel {
  double fx = 300.0;
  double fy = 300.0;
  double cx = 173.0;
  double cy = 130.0;
  int width = 346;
  int height = 260;

  void validate() const {
    if (!(fx > 0.0 && fy > 0.0)) throw InvalidArgument("focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InvalidArgument("sensor size must be positive");
  }

  Vec2 project_unchecked(const Vec3& p) const { return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy}; }

  Vec2 project(const Vec3& p) const {
    if (!(p.z() > 0.0)) throw Error("cannot project a point at or behind the camera plane");
    return project_unchecked(p);
  }

  Vec3 ray_direction(const Vec2& pixel) const {
    return Vec3((pixel.x() - cx) / fx, (pixel.y() - cy) / fy, 1.0).normalized();
  }

  bool operator==(const CameraModel&) const = default;
};

/// Camera file: a single line `fx fy cx cy width height`.
inline CameraModel read_camera(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open camera file: " + path);
  CameraModel cam;
  if (!(in >> cam.fx >> cam.fy >> cam.cx >> cam.cy >> cam.width >> cam.height)) {
    throw Error("malformed camera file: " + path);
  }
  cam.validate();
  return cam;
}

inline void write_camera(const std::string& path, const CameraModel& cam) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write camera file: " + path);
  out.precision(17);
  out << cam.fx << ' ' << cam.fy << ' ' << cam.cx << ' ' << cam.cy << ' ' << cam.width << ' ' << cam.height
      << '\n';
}

/// Axis-aligned square crop box.
struct BBox {
  static constexpr double kMinSide = 8.0;

  Vec2 center = Vec2::Zero();
  double side = kMinSide;
  bool clamped = false;  // set when the tight extent fell below kMinSide

  double left() const { return center.x() - 0.5 * side; }
  double right() const { return center.x() + 0.5 * side; }
  double top() const { return center.y() - 0.5 * side; }
  double bottom() const { return center.y() + 0.5 * side; }

  /// Pixels whose centers fall inside the box, clipped to a width x height sensor.
  PixelWindow window(int width, int height) const {
    PixelWindow w;
    w.x0 = std::clamp(static_cast<int>(std::ceil(left() - 0.5)), 0, width);
    w.y0 = std::clamp(static_cast<int>(std::ceil(top() - 0.5)), 0, height);
    w.x1 = std::clamp(static_cast<int>(std::floor(right() + 0.5)), 0, width);
    w.y1 = std::clamp(static_cast<int>(std::floor(bottom() + 0.5)), 0, height);
    return w;
  }
};

/// Square centered on the tight rectangle, side 1.5x its longest edge.
inline BBox bbox_from_joints2d(std::span<const Vec2> points) {
  if (points.empty()) throw InvalidArgument("bounding box of an empty point set");
  Vec2 lo = points[0];
  Vec2 hi = points[0];
  for (const Vec2& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  BBox box;
  box.center = 0.5 * (lo + hi);
  box.side = 1.5 * (hi - lo).maxCoeff();
  if (box.side < BBox::kMinSide) {
    box.side = BBox::kMinSide;
    box.clamped = true;
  }
  return box;
}

/// Smallest square covering both boxes, centered on their union rectangle.
inline BBox bbox_union(const BBox& a, const BBox& b) {
  const Vec2 lo(std::min(a.left(), b.left()), std::min(a.top(), b.top()));
  const Vec2 hi(std::max(a.right(), b.right()), std::max(a.bottom(), b.bottom()));
  BBox out;
  out.center = 0.5 * (lo + hi);
  out.side = (hi - lo).maxCoeff();
  out.clamped = a.clamped && b.clamped;
  return out;
}

inline std::array<Vec2, kNumKeypoints> project_joints(const Joints3D& joints, const CameraModel& model) {
  std::array<Vec2, kNumKeypoints> out;
  for (int i = 0; i < kNumKeypoints; ++i) out[i] = model.project(joints[i]);
  return out;
}

inline BBox bbox_for_subsegment(const Joints3D& joints_start, const Joints3D& joints_end,
                                const CameraModel& model) {
  const auto a = project_joints(joints_start, model);
  const auto b = project_joints(joints_end, model);
  return bbox_union(bbox_from_joints2d(a), bbox_from_joints2d(b));
}

/// Bilinear resample of `box` to out x out. Samples inside the sensor extent
/// [-0.5, W-0.5] x [-0.5, H-0.5] use edge-clamped interpolation; samples
/// outside it are zero.
inline Grid<double> crop_resize(const Grid<double>& grid, const BBox& box, int out = 128) {
  if (out <= 0) throw InvalidArgument("output size must be positive");
  const double w = grid.width();
  const double h = grid.height();
  if (box.right() <= -0.5 || box.left() >= w - 0.5 || box.bottom() <= -0.5 || box.top() >= h - 0.5) {
    throw Error("crop box lies entirely outside the grid");
  }
  Grid<double> res(out, out, grid.channels(), 0.0);
  const double step = box.side / out;
  for (int j = 0; j < out; ++j) {
    const double v = box.top() + (j + 0.5) * step;
    if (v < -0.5 || v > h - 0.5) continue;
    const double vc = std::clamp(v, 0.0, h - 1.0);
    const int y0 = std::min(static_cast<int>(std::floor(vc)), grid.height() - 1);
    const int y1 = std::min(y0 + 1, grid.height() - 1);
    const double fy = vc - y0;
    for (int i = 0; i < out; ++i) {
      const double u = box.left() + (i + 0.5) * step;
      if (u < -0.5 || u > w - 0.5) continue;
      const double uc = std::clamp(u, 0.0, w - 1.0);
      const int x0 = std::min(static_cast<int>(std::floor(uc)), grid.width() - 1);
      const int x1 = std::min(x0 + 1, grid.width() - 1);
      const double fx = uc - x0;
      for (int c = 0; c < grid.channels(); ++c) {
        const double top = (1.0 - fx) * grid(x0, y0, c) + fx * grid(x1, y0, c);
        const double bot = (1.0 - fx) * grid(x0, y1, c) + fx * grid(x1, y1, c);
        res(i, j, c) = (1.0 - fy) * top + fy * bot;
      }
    }
  }
  return res;
}

}  // namespace evhand
