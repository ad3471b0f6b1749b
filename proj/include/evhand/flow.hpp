#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "evhand/camera.hpp"
#include "evhand/grid.hpp"
#include "evhand/hand_model.hpp"
#include "evhand/raster.hpp"

namespace evhand {

/// Dense image-plane flow in px/s. Invalid pixels hold zero.
struct FlowField {
  Grid<double> flow;           // 2 channels: u, v
  Grid<std::uint8_t> valid;    // 1 where flow is defined

  FlowField() = default;
  FlowField(int width, int height) : flow(width, height, 2, 0.0), valid(width, height, 1, 0) {}

  int width() const { return flow.width(); }
  int height() const { return flow.height(); }
  bool is_valid(int x, int y) const { return valid(x, y) != 0; }
  Vec2 at(int x, int y) const { return {flow(x, y, 0), flow(x, y, 1)}; }

  void set(int x, int y, const Vec2& f) {
    flow(x, y, 0) = f.x();
    flow(x, y, 1) = f.y();
    valid(x, y) = 1;
  }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid.data()) n += v != 0;
    return n;
  }

  /// Flow that is the same everywhere on the sensor.
  static FlowField constant(int width, int height, const Vec2& f) {
    FlowField out(width, height);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) out.set(x, y, f);
    }
    return out;
  }
};

inline constexpr int kDefaultMeshFlowK = 4;

/// Mesh flow with the per-pixel triangle assignment captured once.
///
/// Construction interpolates K+1 parameter sets between `a` and `b`,
/// rasterizes meshes M_0..M_{K-1} and records, for each covered pixel and each
/// k, which face the camera ray hits first. evaluate() then recomputes
/// barycentric weights and vertex speeds for any pair of parameters while
/// keeping that assignment fixed, which is what differentiating through a hard
/// rasterizer sees. evaluate(a, b) on the construction pair is the mesh flow.
class MeshFlowLayer {
 public:
  struct Fragment {
    int pixel = 0;
    int k = 0;
    int face = 0;
  };

  MeshFlowLayer(const HandParams& a, const HandParams& b, int K, const CameraModel& model)
      : K_(K), model_(model) {
    if (K < 1) throw InvalidArgument("mesh flow needs K >= 1");
    if (!(a.timestamp < b.timestamp)) throw InvalidArgument("mesh flow needs a.timestamp < b.timestamp");
    const auto params = interpolate_params(a, b, K);
    const auto& faces = hand_topology()->faces;
    for (int k = 0; k < K; ++k) {
      const auto sv = project_vertices(skin_vertices(params[k]), model_);
      const Rasterization r = rasterize(sv, faces, model_.width, model_.height);
      for (int idx : r.covered) fragments_.push_back({idx, k, r.face.data()[idx]});
    }
  }

  int K() const { return K_; }
  const std::vector<Fragment>& fragments() const { return fragments_; }

  /// Projected per-vertex speeds S_k (px/s) for k = 0..K-1, plus screen
  /// vertices of each M_k.
  struct Kinematics {
    std::vector<std::vector<ScreenVertex>> screen;
    std::vector<std::vector<Vec2>> speed;
  };

  Kinematics kinematics(const HandParams& a, const HandParams& b) const {
    const auto params = interpolate_params(a, b, K_);
    const double dt = b.timestamp - a.timestamp;
    Kinematics kin;
    kin.screen.resize(K_ + 1);
    for (int k = 0; k <= K_; ++k) kin.screen[k] = project_vertices(skin_vertices(params[k]), model_);
    kin.speed.resize(K_);
    const auto& last = kin.screen[K_];
    for (int k = 0; k < K_; ++k) {
      const double scale = static_cast<double>(K_) / ((K_ - k) * dt);
      auto& s = kin.speed[k];
      s.resize(last.size());
      for (std::size_t i = 0; i < last.size(); ++i) s[i] = scale * (last[i].px - kin.screen[k][i].px);
    }
    return kin;
  }

  FlowField evaluate(const HandParams& a, const HandParams& b) const {
    const Kinematics kin = kinematics(a, b);
    const auto& faces = hand_topology()->faces;
    FlowField out(model_.width, model_.height);
    std::vector<int> count(out.flow.plane_size(), 0);
    auto u = out.flow.channel(0);
    auto v = out.flow.channel(1);
    Barycentric bc;
    for (const Fragment& fr : fragments_) {
      const Face& f = faces[fr.face];
      const auto& sv = kin.screen[fr.k];
      const Vec2 pixel(fr.pixel % model_.width, fr.pixel / model_.width);
      if (!barycentric(sv[f[0]], sv[f[1]], sv[f[2]], pixel, bc)) continue;
      Vec2 flow = Vec2::Zero();
      for (int j = 0; j < 3; ++j) flow += bc.perspective[j] * kin.speed[fr.k][f[j]];
      u[fr.pixel] += flow.x();
      v[fr.pixel] += flow.y();
      ++count[fr.pixel];
    }
    auto valid = out.valid.channel(0);
    for (std::size_t i = 0; i < count.size(); ++i) {
      if (count[i] > 0) {
        u[i] /= count[i];
        v[i] /= count[i];
        valid[i] = 1;
      }
    }
    return out;
  }

 private:
  int K_;
  CameraModel model_;
  std::vector<Fragment> fragments_;
};

/// Dense hand flow averaged over K interpolated meshes.
inline FlowField mesh_flow(const HandParams& a, const HandParams& b, int K, const CameraModel& model) {
  return MeshFlowLayer(a, b, K, model).evaluate(a, b);
}

/// Straight-line vertex motion from M_a to M_b rasterized on M_a.
inline FlowField vertex_flow(const HandParams& a, const HandParams& b, const CameraModel& model) {
  return MeshFlowLayer(a, b, 1, model).evaluate(a, b);
}

/// The four pixels around `p` with bilinear weights (which sum to 1).
inline std::array<std::pair<Eigen::Vector2i, double>, 4> bilinear_splat_weights(const Vec2& p) {
  const int x0 = static_cast<int>(std::floor(p.x()));
  const int y0 = static_cast<int>(std::floor(p.y()));
  const double fx = p.x() - x0;
  const double fy = p.y() - y0;
  return {{{Eigen::Vector2i(x0, y0), (1.0 - fx) * (1.0 - fy)},
           {Eigen::Vector2i(x0 + 1, y0), fx * (1.0 - fy)},
           {Eigen::Vector2i(x0, y0 + 1), (1.0 - fx) * fy},
           {Eigen::Vector2i(x0 + 1, y0 + 1), fx * fy}}};
}

/// Projected vertex displacements splatted around each projected vertex of
/// M_a; pixels that receive no weight stay invalid.
inline FlowField linear_flow(const HandParams& a, const HandParams& b, const CameraModel& model) {
  if (!(a.timestamp < b.timestamp)) throw InvalidArgument("linear flow needs a.timestamp < b.timestamp");
  const double dt = b.timestamp - a.timestamp;
  const auto va = skin_vertices(a);
  const auto vb = skin_vertices(b);
  FlowField out(model.width, model.height);
  Grid<double> weight(model.width, model.height, 1, 0.0);
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (va[i].z() <= kNearPlane || vb[i].z() <= kNearPlane) continue;
    const Vec2 pa = model.project_unchecked(va[i]);
    const Vec2 speed = (model.project_unchecked(vb[i]) - pa) / dt;
    for (const auto& [px, w] : bilinear_splat_weights(pa)) {
      if (w <= 0.0 || !weight.contains(px.x(), px.y())) continue;
      weight(px.x(), px.y()) += w;
      out.flow(px.x(), px.y(), 0) += w * speed.x();
      out.flow(px.x(), px.y(), 1) += w * speed.y();
    }
  }
  for (int y = 0; y < model.height; ++y) {
    for (int x = 0; x < model.width; ++x) {
      if (weight(x, y) > 0.0) out.set(x, y, out.at(x, y) / weight(x, y));
    }
  }
  return out;
}

/// Mean endpoint error over pixels valid in both fields.
inline double epe(const FlowField& pred, const FlowField& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) throw InvalidArgument("flow sizes differ");
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!pred.is_valid(x, y) || !gt.is_valid(x, y)) continue;
      sum += (pred.at(x, y) - gt.at(x, y)).norm();
      ++n;
    }
  }
  if (n == 0) throw Error("flow fields share no valid pixel");
  return sum / static_cast<double>(n);
}

// Flow dump: `FLW1`, u32 H, u32 W, then H x W records (f32 u, f32 v, u8 valid),
// little-endian, rows top to bottom.

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4] = {};
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("truncated FLW1 stream");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline void write_flow(std::ostream& out, const FlowField& f) {
  out.write("FLW1", 4);
  detail::put_u32(out, static_cast<std::uint32_t>(f.height()));
  detail::put_u32(out, static_cast<std::uint32_t>(f.width()));
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      for (int c = 0; c < 2; ++c) {
        const float v = static_cast<float>(f.flow(x, y, c));
        std::uint32_t bits = 0;
        std::memcpy(&bits, &v, 4);
        detail::put_u32(out, bits);
      }
      const char valid = f.is_valid(x, y) ? 1 : 0;
      out.write(&valid, 1);
    }
  }
}

inline void write_flow(const std::string& path, const FlowField& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write flow: " + path);
  write_flow(out, f);
}

inline FlowField read_flow(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, "FLW1", 4) != 0) throw Error("missing FLW1 magic");
  const auto h = detail::get_u32(in);
  const auto w = detail::get_u32(in);
  FlowField f(static_cast<int>(w), static_cast<int>(h));
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      for (int c = 0; c < 2; ++c) {
        const std::uint32_t bits = detail::get_u32(in);
        float v = 0.0f;
        std::memcpy(&v, &bits, 4);
        f.flow(x, y, c) = v;
      }
      char valid = 0;
      if (!in.read(&valid, 1)) throw Error("truncated FLW1 stream");
      f.valid(x, y) = valid ? 1 : 0;
    }
  }
  return f;
}

inline FlowField read_flow(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open flow: " + path);
  return read_flow(in);
}

}  // namespace evhand
