#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "g2s/error.hpp"
#include "g2s/geometry.hpp"
#include "g2s/rng.hpp"
#include "oracles.hpp"

using namespace g2s;

using namespace g2s::oracle;

TEST(NormalizeDegrees, Range) {
  EXPECT_DOUBLE_EQ(normalize_degrees(-90), 270);
  EXPECT_DOUBLE_EQ(normalize_degrees(720), 0);
  EXPECT_DOUBLE_EQ(normalize_degrees(359.5), 359.5);
}

TEST(MinAreaObb, AxisAlignedUnitSquare) {
  const auto r = min_area_obb(rectangle(1, 1, 0, 0, 0));
  EXPECT_EQ(r.alpha_hat, 0);
  EXPECT_NEAR(r.area, 1.0, 1e-12);
  EXPECT_NEAR(r.box.w, 1.0, 1e-12);
  EXPECT_NEAR(r.box.l, 1.0, 1e-12);
}

TEST(MinAreaObb, RotatedSquare) {
  const auto r = min_area_obb(rectangle(1, 1, 0, 0, 30));
  EXPECT_EQ(r.alpha_hat, 60);
  EXPECT_NEAR(r.box.w, 1.0, 1e-9);
  EXPECT_NEAR(r.box.l, 1.0, 1e-9);
  EXPECT_NEAR(r.box.cx, 0.0, 1e-9);
}

TEST(MinAreaObb, DiagonalPairClampsExtent) {
  const PointCloud pc{{0, 0, 0}, {1, 1, 0}};
  const auto r = min_area_obb(pc);
  EXPECT_EQ(r.alpha_hat, 45);
  EXPECT_NEAR(std::max(r.box.w, r.box.l), std::sqrt(2.0), 1e-9);
  EXPECT_DOUBLE_EQ(std::min(r.box.w, r.box.l), kMinExtent);
  EXPECT_DOUBLE_EQ(r.box.h, kMinExtent);
}

TEST(MinAreaObb, DegenerateInputRejected) {
  const PointCloud pc{{1, 1, 0}, {1, 1, 5}};
  EXPECT_THROW(min_area_obb(pc), Error);
}

TEST(MinAreaObb, MatchesBruteForce) {
  Rng rng(1);
  for (int k = 0; k < 300; ++k) {
    const auto pc = rectangle(rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(-5, 5), rng.uniform(-5, 5),
                              rng.uniform(0, 360), rng.uniform_int(0, 5));
    const auto r = min_area_obb(pc);
    const auto [a, area] = brute_force_obb(pc);
    EXPECT_EQ(r.alpha_hat, a);
    EXPECT_NEAR(r.area, area, 1e-9);
  }
}

TEST(MinAreaObb, BoxContainsCloudAndIsNoLargerThanAabb) {
  Rng rng(2);
  for (int k = 0; k < 100; ++k) {
    PointCloud pc;
    for (int i = 0; i < 30; ++i) pc.push_back({rng.uniform(-1, 1), rng.uniform(-0.3, 0.3), rng.uniform(0, 1)});
    const auto r = min_area_obb(pc);
    const double aabb = rotated_aabb_area(pc, 0);
    EXPECT_LE(r.area, aabb + 1e-12);
    if (r.alpha_hat == 0) EXPECT_DOUBLE_EQ(r.area, aabb);
    OrientedBox grown = r.box;
    grown.w += 1e-9, grown.l += 1e-9, grown.h += 1e-9;
    for (const auto& p : pc) EXPECT_TRUE(contains(grown, p));
  }
}

TEST(MinAreaObb, TranslationInvariant) {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    PointCloud pc;
    for (int i = 0; i < 20; ++i) pc.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 1)});
    const double dx = rng.uniform(-10, 10), dy = rng.uniform(-10, 10), dz = rng.uniform(-2, 2);
    PointCloud moved = pc;
    for (auto& p : moved) p = {p[0] + dx, p[1] + dy, p[2] + dz};
    const auto a = min_area_obb(pc), b = min_area_obb(moved);
    EXPECT_EQ(a.alpha_hat, b.alpha_hat);
    EXPECT_NEAR(a.box.cx + dx, b.box.cx, 1e-9);
    EXPECT_NEAR(a.box.cy + dy, b.box.cy, 1e-9);
    EXPECT_NEAR(a.box.cz + dz, b.box.cz, 1e-9);
    EXPECT_NEAR(a.box.w, b.box.w, 1e-9);
  }
}

TEST(CanonicalFront, Category1FacesLargerExtent) {
  OrientedBox b;
  b.w = 2, b.l = 1, b.alpha = 10;
  const auto out = canonical_front(b, {}, 1);
  EXPECT_DOUBLE_EQ(out.l, 2);
  EXPECT_DOUBLE_EQ(out.w, 1);
  EXPECT_DOUBLE_EQ(out.alpha, 100);
  b.w = 1, b.l = 2;
  EXPECT_EQ(canonical_front(b, {}, 1), b);
}

TEST(CanonicalFront, Category2FollowsMass) {
  OrientedBox b;
  b.w = 1, b.l = 2;
  PointCloud pc{{0, -1, 0}, {0, -0.9, 0}, {0, -0.8, 0}, {0, 1, 0}};
  const auto out = canonical_front(b, pc, 2);
  EXPECT_DOUBLE_EQ(out.alpha, 180);
  const auto f = front_direction(out);
  EXPECT_NEAR(f[1], -1, 1e-12);
}

TEST(CanonicalFront, Category2SymmetricFallsBackToCategory1) {
  OrientedBox b;
  b.w = 2, b.l = 1;
  PointCloud pc{{1, 0, 0}, {-1, 0, 0}, {0, 0.5, 0}, {0, -0.5, 0}};
  EXPECT_EQ(canonical_front(b, pc, 2), canonical_front(b, pc, 1));
}

TEST(CanonicalFront, Category3ManualChoice) {
  OrientedBox b;
  b.w = 1, b.l = 2, b.alpha = 270;
  const auto out = canonical_front(b, {}, 3, 2);
  EXPECT_DOUBLE_EQ(out.alpha, 90);
  EXPECT_DOUBLE_EQ(out.w, 1);
  EXPECT_THROW(canonical_front(b, {}, 3), Error);
}

TEST(QuarterTurn, FootprintUnchanged) {
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const auto b = random_box(rng);
    for (int q = 0; q < 4; ++q) EXPECT_NEAR(box_iou(b, quarter_turn(b, q)), 1.0, 1e-9);
  }
}

TEST(RefineSupport, ExtendsFloatingBox) {
  OrientedBox b;
  b.h = 0.5, b.cz = 0.2 + 0.25;
  const auto out = refine_support(b, 0.0);
  EXPECT_NEAR(out.bottom(), 0.0, 1e-12);
  EXPECT_NEAR(out.h, 0.7, 1e-12);
  EXPECT_NEAR(out.top(), b.top(), 1e-12);
}

TEST(RefineSupport, SmallOrNegativeGapUnchanged) {
  OrientedBox b;
  b.h = 0.5, b.cz = 0.05 + 0.25;
  EXPECT_EQ(refine_support(b, 0.0), b);
  b.cz = 0.1;
  EXPECT_EQ(refine_support(b, 0.0), b);
}

TEST(RefineSupport, NeverShrinksNorMovesTop) {
  Rng rng(5);
  for (int k = 0; k < 500; ++k) {
    const auto b = random_box(rng);
    const auto out = refine_support(b, rng.uniform(-3, 3));
    EXPECT_GE(out.h, b.h);
    EXPECT_NEAR(out.top(), b.top(), 1e-12);
  }
}

TEST(Ransac, NoiselessPlane) {
  Rng rng(6);
  PointCloud pc;
  for (int i = 0; i < 100; ++i) pc.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0});
  const Plane p = ransac_plane(pc);
  EXPECT_NEAR(std::abs(p.normal[2]), 1.0, 1e-9);
  EXPECT_NEAR(p.d, 0.0, 1e-9);
}

TEST(Ransac, RecoversPlaneAmongOutliers) {
  Rng rng(7);
  PointCloud pc;
  for (int i = 0; i < 700; ++i) pc.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), 1.0 + rng.uniform(-0.005, 0.005)});
  for (int i = 0; i < 300; ++i) pc.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1, 3)});
  RansacOptions opt;
  opt.seed = 9;
  const Plane p = ransac_plane(pc, opt);
  EXPECT_NEAR(p.height_at(0.3, -0.4), 1.0, opt.inlier_threshold);
  EXPECT_NEAR(std::abs(p.normal[2]), 1.0, 1e-3);
}

TEST(Ransac, ThreePointsExact) {
  const PointCloud pc{{0, 0, 1}, {1, 0, 2}, {0, 1, 1}};
  const Plane p = ransac_plane(pc);
  for (const auto& q : pc) EXPECT_NEAR(p.signed_distance(q), 0.0, 1e-12);
}

TEST(Ransac, CollinearRejected) {
  const PointCloud pc{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  EXPECT_THROW(ransac_plane(pc), Error);
}

TEST(Ransac, TightThresholdExactOnPlanarData) {
  Rng rng(8);
  PointCloud pc;
  for (int i = 0; i < 50; ++i) {
    const double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
    pc.push_back({x, y, 0.3 * x - 0.2 * y + 0.5});
  }
  RansacOptions opt;
  opt.inlier_threshold = 1e-12;
  const Plane p = ransac_plane(pc, opt);
  for (const auto& q : pc) EXPECT_NEAR(p.signed_distance(q), 0.0, 1e-9);
}

TEST(Ransac, DeterministicGivenSeed) {
  Rng rng(10);
  PointCloud pc;
  for (int i = 0; i < 200; ++i) pc.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 0.05)});
  RansacOptions opt;
  opt.seed = 4;
  const Plane a = ransac_plane(pc, opt), b = ransac_plane(pc, opt);
  EXPECT_EQ(a.normal, b.normal);
  EXPECT_EQ(a.d, b.d);
}

TEST(BoxIou, IdentityAndDisjoint) {
  OrientedBox a;
  a.alpha = 33;
  EXPECT_NEAR(box_iou(a, a), 1.0, 1e-12);
  OrientedBox b = a;
  b.cx = 5;
  EXPECT_EQ(box_iou(a, b), 0.0);
  b.cx = 0, b.cz = 3;
  EXPECT_EQ(box_iou(a, b), 0.0);
}

TEST(BoxIou, OffsetUnitCubes) {
  OrientedBox a, b;
  b.cx = 0.5;
  EXPECT_NEAR(box_iou(a, b), 1.0 / 3.0, 1e-12);
  Rng rng(11);
  EXPECT_NEAR(mc_iou(a, b, 1000000, rng), 1.0 / 3.0, 1e-3);
}

TEST(BoxIou, ZeroCentered) {
  OrientedBox a, b;
  b.cx = 10;
  b.w = 2;
  EXPECT_EQ(box_iou(a, b), 0.0);
  EXPECT_NEAR(box_iou(a, b, true), 0.5, 1e-12);
}

TEST(BoxIou, SymmetricAndRigidInvariant) {
  Rng rng(12);
  for (int k = 0; k < 300; ++k) {
    const auto a = random_box(rng, 0.7), b = random_box(rng, 0.7);
    const double v = box_iou(a, b);
    EXPECT_NEAR(v, box_iou(b, a), 1e-12);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    const double t = rng.uniform(0, 360), r = t * kPi / 180, dx = rng.uniform(-3, 3), dy = rng.uniform(-3, 3);
    auto move = [&](OrientedBox x) {
      const double px = x.cx, py = x.cy;
      x.cx = std::cos(r) * px - std::sin(r) * py + dx;
      x.cy = std::sin(r) * px + std::cos(r) * py + dy;
      x.cz += 0.25;
      x.alpha = normalize_degrees(x.alpha + t);
      return x;
    };
    EXPECT_NEAR(box_iou(move(a), move(b)), v, 1e-9);
  }
}

TEST(BoxIou, MatchesMonteCarloOnRandomPairs) {
  Rng rng(13);
  for (int k = 0; k < 20; ++k) {
    const auto a = random_box(rng, 0.5), b = random_box(rng, 0.5);
    EXPECT_NEAR(box_iou(a, b), mc_iou(a, b, 200000, rng), 0.01);
  }
}

TEST(Chamfer, HandValues) {
  const PointCloud a{{0, 0, 0}}, b{{1, 0, 0}};
  EXPECT_DOUBLE_EQ(chamfer(a, b), 2.0);
  EXPECT_DOUBLE_EQ(chamfer(a, a), 0.0);
  const PointCloud c{{0, 0, 0}, {2, 0, 0}}, d{{0, 0, 0}};
  // c -> d: (0 + 4) / 2, d -> c: 0.
  EXPECT_DOUBLE_EQ(chamfer(c, d), 2.0);
  EXPECT_THROW(chamfer(a, PointCloud{}), Error);
}

TEST(Chamfer, SymmetryProperty) {
  Rng rng(14);
  for (int k = 0; k < 20; ++k) {
    PointCloud a, b;
    for (int i = 0; i < 30; ++i) a.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    for (int i = 0; i < 17; ++i) b.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    EXPECT_DOUBLE_EQ(chamfer(a, b), chamfer(b, a));
  }
}

TEST(PointCloudIo, BinaryAndJsonRoundTrip) {
  const PointCloud pc{{0.5, -1.25, 2}, {3, 4, 5}};
  const std::string bin = write_pointcloud_binary(pc);
  EXPECT_EQ(bin.substr(0, 7), "G23DPC1");
  EXPECT_EQ(bin.size(), 7 + 8 + 2 * 12u);
  EXPECT_EQ(read_pointcloud(bin), pc);
  EXPECT_EQ(read_pointcloud(write_pointcloud_json(pc)), pc);
  EXPECT_THROW(read_pointcloud_binary(bin.substr(0, bin.size() - 1)), Error);
}
