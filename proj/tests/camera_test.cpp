#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace evhand;

TEST(Camera, ProjectArithmetic) {
  CameraModel unit{1.0, 1.0, 0.0, 0.0, 10, 10};
  EXPECT_EQ(unit.project(Vec3(0, 0, 1)), Vec2(0, 0));
  CameraModel m;
  m.fx = 200.0;
  EXPECT_DOUBLE_EQ(m.project(Vec3(0.1, 0, 1)).x(), 193.0);
  EXPECT_THROW(m.project(Vec3(0, 0, -1)), Error);
  EXPECT_THROW(m.project(Vec3(0, 0, 0)), Error);
}

TEST(Camera, RayDirection) {
  const CameraModel m;
  EXPECT_LE((m.ray_direction(Vec2(m.cx, m.cy)) - Vec3(0, 0, 1)).norm(), 1e-15);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-50.0, 400.0);
  for (int i = 0; i < 200; ++i) {
    const Vec2 px(u(rng), u(rng));
    const Vec3 r = m.ray_direction(px);
    EXPECT_NEAR(r.norm(), 1.0, 1e-12);
    for (double z : {0.1, 1.0, 7.5}) EXPECT_LE((m.project(r * z) - px).norm(), 1e-9);
  }
}

TEST(Camera, RejectsBadIntrinsics) {
  CameraModel m;
  m.fx = 0.0;
  EXPECT_THROW(m.validate(), InvalidArgument);
  m = CameraModel{};
  m.height = 0;
  EXPECT_THROW(m.validate(), InvalidArgument);
}

TEST(Camera, FileRoundTrip) {
  const CameraModel m{312.5, 298.25, 170.0, 131.5, 346, 260};
  const std::string path = ::testing::TempDir() + "/cam.txt";
  write_camera(path, m);
  const CameraModel r = read_camera(path);
  EXPECT_EQ(r.fx, m.fx);
  EXPECT_EQ(r.fy, m.fy);
  EXPECT_EQ(r.cx, m.cx);
  EXPECT_EQ(r.cy, m.cy);
  EXPECT_EQ(r.width, m.width);
  EXPECT_EQ(r.height, m.height);
}

TEST(BBox, RectangleGivesOneAndAHalfSquare) {
  const std::vector<Vec2> pts = {{80, 90}, {120, 110}, {100, 100}};
  const BBox b = bbox_from_joints2d(pts);
  EXPECT_NEAR(b.side, 60.0, 1e-9);
  EXPECT_LE((b.center - Vec2(100, 100)).norm(), 1e-12);
  EXPECT_FALSE(b.clamped);
}

TEST(BBox, SinglePointIsClamped) {
  const std::vector<Vec2> pts = {{10, 20}};
  const BBox b = bbox_from_joints2d(pts);
  EXPECT_EQ(b.side, BBox::kMinSide);
  EXPECT_TRUE(b.clamped);
  EXPECT_EQ(b.center, Vec2(10, 20));
  EXPECT_THROW(bbox_from_joints2d(std::span<const Vec2>{}), InvalidArgument);
}

TEST(BBox, UnionCoversBoth) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> c(0, 300);
  std::uniform_real_distribution<double> s(1, 80);
  for (int i = 0; i < 100; ++i) {
    BBox a;
    a.center = Vec2(c(rng), c(rng));
    a.side = s(rng);
    BBox b;
    b.center = Vec2(c(rng), c(rng));
    b.side = s(rng);
    const BBox u = bbox_union(a, b);
    for (const BBox* x : {&a, &b}) {
      EXPECT_LE(u.left(), x->left() + 1e-9);
      EXPECT_LE(u.top(), x->top() + 1e-9);
      EXPECT_GE(u.right(), x->right() - 1e-9);
      EXPECT_GE(u.bottom(), x->bottom() - 1e-9);
    }
    // Tight along the longer axis.
    const double w = std::max(a.right(), b.right()) - std::min(a.left(), b.left());
    const double h = std::max(a.bottom(), b.bottom()) - std::min(a.top(), b.top());
    EXPECT_NEAR(u.side, std::max(w, h), 1e-9);
  }
}

TEST(BBox, SubsegmentIdenticalJointsMatchesSingleFrame) {
  const CameraModel m;
  const Joints3D j = regress_joints(scene::hand_at(0.0));
  const BBox one = bbox_from_joints2d(project_joints(j, m));
  const BBox both = bbox_for_subsegment(j, j, m);
  EXPECT_LE((one.center - both.center).norm(), 1e-12);
  EXPECT_NEAR(one.side, both.side, 1e-12);
}

TEST(BBox, SubsegmentShiftedJointsAgainstBruteForce) {
  const CameraModel m;
  const Joints3D a = regress_joints(scene::hand_at(0.0));
  Joints3D b = a;
  // +10 px in u at each joint's depth.
  for (auto& p : b) p.x() += 10.0 * p.z() / m.fx;
  const BBox box = bbox_for_subsegment(a, b, m);

  // Oracle: squares built by hand from the projected points, then covered.
  auto square = [&](const Joints3D& j) {
    double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
    for (const Vec3& p : j) {
      const double u = m.fx * p.x() / p.z() + m.cx;
      const double v = m.fy * p.y() / p.z() + m.cy;
      x0 = std::min(x0, u), x1 = std::max(x1, u), y0 = std::min(y0, v), y1 = std::max(y1, v);
    }
    const double half = 0.75 * std::max(x1 - x0, y1 - y0);
    return std::array<double, 4>{0.5 * (x0 + x1) - half, 0.5 * (y0 + y1) - half, 0.5 * (x0 + x1) + half,
                                 0.5 * (y0 + y1) + half};
  };
  const auto sa = square(a);
  const auto sb = square(b);
  const double l = std::min(sa[0], sb[0]), t = std::min(sa[1], sb[1]);
  const double r = std::max(sa[2], sb[2]), btm = std::max(sa[3], sb[3]);
  EXPECT_NEAR(box.side, std::max(r - l, btm - t), 1e-9);
  EXPECT_NEAR(box.center.x(), 0.5 * (l + r), 1e-9);
  EXPECT_NEAR(box.center.y(), 0.5 * (t + btm), 1e-9);
  EXPECT_NEAR(box.right() - box.left(), bbox_from_joints2d(project_joints(a, m)).side + 10.0, 1e-9);
}

TEST(BBox, SubsegmentDegenerateIsClamped) {
  const CameraModel m;
  Joints3D j;
  j.fill(Vec3(0.0, 0.0, 0.5));
  const BBox b = bbox_for_subsegment(j, j, m);
  EXPECT_EQ(b.side, BBox::kMinSide);
  EXPECT_TRUE(b.clamped);
  j[3].z() = -0.1;
  EXPECT_THROW(bbox_for_subsegment(j, j, m), Error);
}

TEST(BBox, SideExactlyOneAndAHalfLongest) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 300);
  for (int i = 0; i < 100; ++i) {
    std::vector<Vec2> pts(21);
    for (auto& p : pts) p = Vec2(u(rng), u(rng));
    double w = 0, h = 0;
    for (auto& p : pts)
      for (auto& q : pts) w = std::max(w, std::abs(p.x() - q.x())), h = std::max(h, std::abs(p.y() - q.y()));
    EXPECT_NEAR(bbox_from_joints2d(pts).side, 1.5 * std::max(w, h), 1e-9);
  }
}

TEST(CropResize, FullFrameConstant) {
  const Grid<double> g(346, 260, 2, 1.0);
  BBox b;
  b.center = Vec2(172.5, 129.5);
  b.side = 260.0;
  const Grid<double> out = crop_resize(g, b);
  ASSERT_EQ(out.width(), 128);
  ASSERT_EQ(out.height(), 128);
  ASSERT_EQ(out.channels(), 2);
  for (double v : out.data()) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(CropResize, AlignedSide128IsExactCopy) {
  Grid<double> g(200, 150, 1, 0.0);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (double& v : g.data()) v = u(rng);
  BBox b;
  b.center = Vec2(20 + 63.5, 10 + 63.5);
  b.side = 128.0;
  const Grid<double> out = crop_resize(g, b);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) ASSERT_NEAR(out(x, y), g(x + 20, y + 10), 1e-12);
}

TEST(CropResize, SmoothMassPreservedAgainstAreaOracle) {
  Grid<double> g(346, 260, 1, 0.0);
  for (int y = 0; y < 260; ++y)
    for (int x = 0; x < 346; ++x) g(x, y) = 1.0 + std::sin(0.05 * x) * std::cos(0.04 * y);
  for (int side : {64, 100, 200}) {
    BBox b;
    b.center = Vec2(40 + 0.5 * side - 0.5, 30 + 0.5 * side - 0.5);
    b.side = side;
    double oracle = 0.0;  // area covered by each input pixel is exactly 1
    for (int y = 30; y < 30 + side; ++y)
      for (int x = 40; x < 40 + side; ++x) oracle += g(x, y);
    const Grid<double> out = crop_resize(g, b);
    double mass = 0.0;
    for (double v : out.data()) mass += v;
    mass *= (side / 128.0) * (side / 128.0);
    EXPECT_NEAR(mass / oracle, 1.0, 0.02) << side;
  }
}

TEST(CropResize, OutsideIsZeroPaddedOrRejected) {
  const Grid<double> g(50, 50, 1, 1.0);
  BBox b;
  b.center = Vec2(0, 24.5);
  b.side = 50;
  const Grid<double> out = crop_resize(g, b, 10);
  EXPECT_EQ(out(0, 5), 0.0);
  EXPECT_EQ(out(9, 5), 1.0);
  b.center = Vec2(500, 500);
  EXPECT_THROW(crop_resize(g, b), Error);
}
