#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "g2s/error.hpp"
#include "g2s/rng.hpp"
#include "g2s/shapecodec.hpp"

using namespace g2s;

namespace {

PrimitiveParams random_params(Rng& rng, int categories) {
  PrimitiveParams p;
  p.category_id = static_cast<int>(rng.below(static_cast<std::uint64_t>(categories)));
  p.ax = rng.uniform(0.05, 3);
  p.ay = rng.uniform(0.05, 3);
  p.az = rng.uniform(0.05, 3);
  p.e1 = rng.uniform(kMinExponent, kMaxExponent);
  p.e2 = rng.uniform(kMinExponent, kMaxExponent);
  return p;
}

double norm(const ShapeCode& c) {
  double s = 0;
  for (double x : c) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(Codec, EncodeDeterministicAndUnitNorm) {
  const SuperquadricCodec codec(12);
  Rng rng(1);
  const auto p = random_params(rng, 12);
  EXPECT_EQ(codec.encode(p), codec.encode(p));
  EXPECT_NEAR(norm(codec.encode(p)), 1.0, 1e-12);
}

TEST(Codec, CategoriesDifferInOneHotBlock) {
  const SuperquadricCodec codec(12);
  PrimitiveParams a, b;
  a.category_id = 2;
  b.category_id = 7;
  const auto ca = codec.encode(a), cb = codec.encode(b);
  EXPECT_GT(ca[5 + 2], 0.0);
  EXPECT_EQ(ca[5 + 7], 0.0);
  EXPECT_GT(cb[5 + 7], 0.0);
  EXPECT_EQ(cb[5 + 2], 0.0);
}

TEST(Codec, RoundTripRecoversParams) {
  const SuperquadricCodec codec(12);
  Rng rng(2);
  for (int k = 0; k < 1000; ++k) {
    const auto p = random_params(rng, 12);
    const auto q = codec.unpack(codec.encode(p), false);
    EXPECT_EQ(q.category_id, p.category_id);
    EXPECT_NEAR(q.ax, p.ax, 1e-9);
    EXPECT_NEAR(q.ay, p.ay, 1e-9);
    EXPECT_NEAR(q.az, p.az, 1e-9);
    EXPECT_NEAR(q.e1, p.e1, 1e-9);
    EXPECT_NEAR(q.e2, p.e2, 1e-9);
  }
}

TEST(Codec, InjectiveOnSamples) {
  const SuperquadricCodec codec(12);
  Rng rng(3);
  std::set<ShapeCode> seen;
  for (int k = 0; k < 10000; ++k) seen.insert(codec.encode(random_params(rng, 12)));
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(Codec, RejectsInvalidParams) {
  const SuperquadricCodec codec(4);
  PrimitiveParams p;
  p.e1 = 3.0;
  EXPECT_THROW(codec.encode(p), Error);
  p = {};
  p.ax = 0;
  EXPECT_THROW(codec.encode(p), Error);
  p = {};
  p.category_id = 4;
  EXPECT_THROW(codec.encode(p), Error);
}

TEST(Codec, NearestIdempotentAndFixesValidCodes) {
  const SuperquadricCodec codec(12);
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    const auto valid = codec.encode(random_params(rng, 12));
    const auto n = codec.nearest(valid);
    for (std::size_t d = 0; d < kShapeCodeDim; ++d) EXPECT_NEAR(n[d], valid[d], 1e-12);
    ShapeCode noise;
    for (double& x : noise) x = rng.normal();
    const auto once = codec.nearest(noise);
    const auto twice = codec.nearest(once);
    for (std::size_t d = 0; d < kShapeCodeDim; ++d) EXPECT_NEAR(once[d], twice[d], 1e-12);
  }
}

TEST(Codec, ExponentClamped) {
  const SuperquadricCodec codec(12);
  PrimitiveParams p;
  p.category_id = 3;
  ShapeCode c = codec.encode(p);
  c[3] *= 5.0;  // exponent block now reads 5.0
  EXPECT_NEAR(codec.unpack(c, false).e1, 5.0, 1e-9);
  EXPECT_DOUBLE_EQ(codec.unpack(codec.nearest(c)).e1, 2.0);
}

TEST(Codec, DecodeNonFiniteRejected) {
  const SuperquadricCodec codec(12);
  ShapeCode c{};
  c[7] = std::nan("");
  EXPECT_THROW(codec.decode(c, 10), Error);
  EXPECT_THROW(codec.decode(codec.encode({}), 0), Error);
}

TEST(Decode, BoxLikeShapeContained) {
  const SuperquadricCodec codec(12);
  PrimitiveParams p;
  p.ax = 0.5, p.ay = 0.4, p.az = 0.3, p.e1 = 0.2, p.e2 = 0.2;
  for (const auto& x : codec.decode(codec.encode(p), 500)) {
    EXPECT_LE(std::abs(x[0]), p.ax + 1e-6);
    EXPECT_LE(std::abs(x[1]), p.ay + 1e-6);
    EXPECT_LE(std::abs(x[2]), p.az + 1e-6);
  }
}

TEST(Decode, SinglePointOnSurface) {
  const SuperquadricCodec codec(12);
  PrimitiveParams p;
  const auto pc = codec.decode(codec.encode(p), 1);
  ASSERT_EQ(pc.size(), 1u);
  EXPECT_NEAR(superquadric_implicit(p, pc[0]), 1.0, 1e-6);
}

TEST(Decode, PointsSatisfyImplicitSurface) {
  const SuperquadricCodec codec(12);
  Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    const auto p = random_params(rng, 12);
    const auto q = codec.unpack(codec.encode(p));
    for (const auto& x : codec.decode(codec.encode(p), 257)) EXPECT_NEAR(superquadric_implicit(q, x), 1.0, 1e-6);
  }
}

TEST(Decode, CanonicalCentroid) {
  const SuperquadricCodec codec(12);
  Rng rng(6);
  for (int k = 0; k < 50; ++k) {
    const auto pc = codec.decode(codec.encode(random_params(rng, 12)), 2 * rng.uniform_int(1, 300) + rng.uniform_int(0, 1));
    double mx = 0, mz = 0;
    for (const auto& x : pc) mx += x[0], mz += x[2];
    EXPECT_NEAR(mx / pc.size(), 0.0, 1e-6);
    EXPECT_NEAR(mz / pc.size(), 0.0, 1e-6);
  }
}

TEST(Decode, Deterministic) {
  const SuperquadricCodec codec(12);
  const auto c = codec.encode({});
  EXPECT_EQ(codec.decode(c, 64), codec.decode(c, 64));
}
