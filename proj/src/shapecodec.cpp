#include "g2s/shapecodec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "g2s/error.hpp"
#include "g2s/rng.hpp"

namespace g2s {

namespace {

constexpr std::size_t kParamDims = 5;
constexpr double kOneHotScale = 0.1;
constexpr double kPatternScale = 0.05;
constexpr std::uint64_t kPatternSeed = 0x5eed'c0de'5a9eULL;

void check_params(const PrimitiveParams& p, int num_categories) {
  if (p.category_id < 0 || p.category_id >= num_categories)
    throw Error("shape codec: category " + std::to_string(p.category_id) + " out of range");
  for (double a : {p.ax, p.ay, p.az})
    if (!std::isfinite(a) || a <= 0 || a > kMaxHalfExtent) throw Error("shape codec: half extent " + std::to_string(a) + " out of range");
  for (double e : {p.e1, p.e2})
    if (!std::isfinite(e) || e < kMinExponent || e > kMaxExponent)
      throw Error("shape codec: exponent " + std::to_string(e) + " outside [0.2, 2]");
}

double signed_pow(double base, double e) { return std::copysign(std::pow(std::abs(base), e), base); }

}  // namespace

SuperquadricCodec::SuperquadricCodec(int num_categories) : num_categories_(num_categories) {
  if (num_categories < 1 || kParamDims + static_cast<std::size_t>(num_categories) > kShapeCodeDim)
    throw Error("shape codec: unsupported category count " + std::to_string(num_categories));
  const std::size_t tail = kShapeCodeDim - kParamDims;
  for (int c = 0; c < num_categories; ++c) {
    std::vector<double> t(tail, 0.0);
    t[static_cast<std::size_t>(c)] = kOneHotScale;
    Rng rng(derive_seed(kPatternSeed, static_cast<std::uint64_t>(c)));
    for (std::size_t k = static_cast<std::size_t>(num_categories); k < tail; ++k) t[k] = rng.uniform(-kPatternScale, kPatternScale);
    templates_.push_back(std::move(t));
  }
}

ShapeCode SuperquadricCodec::encode(const PrimitiveParams& p) const {
  check_params(p, num_categories_);
  ShapeCode raw{};
  raw[0] = p.ax;
  raw[1] = p.ay;
  raw[2] = p.az;
  raw[3] = p.e1;
  raw[4] = p.e2;
  const auto& t = templates_[static_cast<std::size_t>(p.category_id)];
  std::copy(t.begin(), t.end(), raw.begin() + kParamDims);
  double n2 = 0;
  for (double x : raw) n2 += x * x;
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : raw) x *= inv;
  return raw;
}

PrimitiveParams SuperquadricCodec::unpack(const ShapeCode& code, bool clamp) const {
  for (double x : code)
    if (!std::isfinite(x)) throw Error("shape codec: code contains a non-finite value");
  // Category: the template best matching the tail block; scale: projection onto it.
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  double best_scale = 0;
  for (int c = 0; c < num_categories_; ++c) {
    const auto& t = templates_[static_cast<std::size_t>(c)];
    double dot = 0, tt = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      dot += code[kParamDims + k] * t[k];
      tt += t[k] * t[k];
    }
    const double score = dot / std::sqrt(tt);
    if (score > best_score) {
      best_score = score;
      best = c;
      best_scale = dot / tt;
    }
  }
  PrimitiveParams p;
  p.category_id = best;
  const double s = std::max(best_scale, 1e-9);
  p.ax = code[0] / s;
  p.ay = code[1] / s;
  p.az = code[2] / s;
  p.e1 = code[3] / s;
  p.e2 = code[4] / s;
  if (clamp) {
    for (double* a : {&p.ax, &p.ay, &p.az}) *a = std::clamp(*a, kMinExtent, kMaxHalfExtent);
    for (double* e : {&p.e1, &p.e2}) *e = std::clamp(*e, kMinExponent, kMaxExponent);
  }
  return p;
}

ShapeCode SuperquadricCodec::nearest(const ShapeCode& code) const { return encode(unpack(code, true)); }

PointCloud SuperquadricCodec::decode(const ShapeCode& code, std::size_t n_points) const {
  if (n_points < 1) throw Error("shape codec: n_points must be at least 1");
  return sample_superquadric(unpack(code, true), n_points);
}

PointCloud sample_superquadric(const PrimitiveParams& p, std::size_t n_points) {
  auto point = [&](double eta, double omega) -> Vec3 {
    const double ce = signed_pow(std::cos(eta), p.e1);
    return {p.ax * ce * signed_pow(std::cos(omega), p.e2), p.ay * ce * signed_pow(std::sin(omega), p.e2),
            p.az * signed_pow(std::sin(eta), p.e1)};
  };
  PointCloud out;
  out.reserve(n_points);
  const std::size_t pairs = n_points / 2;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < pairs; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(pairs);
    const double eta = std::asin(2.0 * t - 1.0);
    const double omega = std::fmod(golden * static_cast<double>(i), 2.0 * std::numbers::pi);
    Vec3 a = point(eta, omega);
    out.push_back(a);
    out.push_back({-a[0], a[1], -a[2]});
  }
  if (n_points % 2 == 1) out.push_back({0.0, p.ay, 0.0});
  return out;
}

double superquadric_implicit(const PrimitiveParams& p, const Vec3& x) {
  const double xy = std::pow(std::abs(x[0] / p.ax), 2.0 / p.e2) + std::pow(std::abs(x[1] / p.ay), 2.0 / p.e2);
  return std::pow(xy, p.e2 / p.e1) + std::pow(std::abs(x[2] / p.az), 2.0 / p.e1);
}

}  // namespace g2s
