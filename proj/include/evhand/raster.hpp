#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "evhand/camera.hpp"
#include "evhand/grid.hpp"
#include "evhand/hand_model.hpp"

namespace evhand {

inline constexpr double kNearPlane = 1e-4;

/// Projected vertex: pixel position plus camera-frame depth.
struct ScreenVertex {
  Vec2 px = Vec2::Zero();
  double z = 1.0;
};

inline std::vector<ScreenVertex> project_vertices(std::span<const Vec3> vertices, const CameraModel& model) {
  std::vector<ScreenVertex> out(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Vec3& v = vertices[i];
    out[i].z = v.z();
    out[i].px = v.z() > kNearPlane ? model.project_unchecked(v) : Vec2(NAN, NAN);
  }
  return out;
}

/// Screen-space and perspective-correct barycentrics of `pixel` in a triangle.
struct Barycentric {
  std::array<double, 3> screen{};
  std::array<double, 3> perspective{};
  double depth = 0.0;

  bool inside() const { return screen[0] >= 0.0 && screen[1] >= 0.0 && screen[2] >= 0.0; }
};

/// Returns false for degenerate (zero-area) triangles.
inline bool barycentric(const ScreenVertex& a, const ScreenVertex& b, const ScreenVertex& c, const Vec2& pixel,
                        Barycentric& out) {
  const double area = (b.px - a.px).x() * (c.px - a.px).y() - (b.px - a.px).y() * (c.px - a.px).x();
  if (!(std::abs(area) > 1e-12)) return false;
  auto edge = [&](const Vec2& p, const Vec2& q) {
    return ((q - p).x() * (pixel - p).y() - (q - p).y() * (pixel - p).x()) / area;
  };
  out.screen = {edge(b.px, c.px), edge(c.px, a.px), edge(a.px, b.px)};
  const double w0 = out.screen[0] / a.z;
  const double w1 = out.screen[1] / b.z;
  const double w2 = out.screen[2] / c.z;
  const double inv_depth = w0 + w1 + w2;
  out.depth = 1.0 / inv_depth;
  out.perspective = {w0 * out.depth, w1 * out.depth, w2 * out.depth};
  return true;
}

/// Z-buffered coverage: nearest face per pixel center, -1 where empty.
struct Rasterization {
  Grid<int> face;
  Grid<double> depth;
  std::vector<int> covered;  // flat pixel indices with a face, ascending

  bool hit(int x, int y) const { return face(x, y) >= 0; }
};

inline Rasterization rasterize(std::span<const ScreenVertex> sv, std::span<const Face> faces, int width,
                               int height) {
  Rasterization r{Grid<int>(width, height, 1, -1),
                  Grid<double>(width, height, 1, std::numeric_limits<double>::infinity()),
                  {}};
  Barycentric bc;
  for (std::size_t fi = 0; fi < faces.size(); ++fi) {
    const Face& f = faces[fi];
    const ScreenVertex& a = sv[f[0]];
    const ScreenVertex& b = sv[f[1]];
    const ScreenVertex& c = sv[f[2]];
    if (a.z <= kNearPlane || b.z <= kNearPlane || c.z <= kNearPlane) continue;
    if (!barycentric(a, b, c, a.px, bc)) continue;
    const double xmin = std::min({a.px.x(), b.px.x(), c.px.x()});
    const double xmax = std::max({a.px.x(), b.px.x(), c.px.x()});
    const double ymin = std::min({a.px.y(), b.px.y(), c.px.y()});
    const double ymax = std::max({a.px.y(), b.px.y(), c.px.y()});
    const int x0 = std::max(0, static_cast<int>(std::ceil(xmin)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(xmax)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(ymin)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(ymax)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        barycentric(a, b, c, Vec2(x, y), bc);
        if (!bc.inside() || !(bc.depth > kNearPlane)) continue;
        if (bc.depth < r.depth(x, y)) {
          r.depth(x, y) = bc.depth;
          r.face(x, y) = static_cast<int>(fi);
        }
      }
    }
  }
  const auto faces_plane = r.face.channel(0);
  for (std::size_t i = 0; i < faces_plane.size(); ++i) {
    if (faces_plane[i] >= 0) r.covered.push_back(static_cast<int>(i));
  }
  return r;
}

inline Rasterization rasterize(std::span<const Vec3> vertices, std::span<const Face> faces,
                               const CameraModel& model) {
  const auto sv = project_vertices(vertices, model);
  return rasterize(sv, faces, model.width, model.height);
}

}  // namespace evhand
