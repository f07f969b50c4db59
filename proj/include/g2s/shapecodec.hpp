#pragma once

#include <array>
#include <memory>
#include <vector>

#include "g2s/geometry.hpp"

namespace g2s {

inline constexpr std::size_t kShapeCodeDim = 128;
using ShapeCode = std::array<double, kShapeCodeDim>;

inline constexpr double kMinExponent = 0.2;
inline constexpr double kMaxExponent = 2.0;
inline constexpr double kMaxHalfExtent = 10.0;

/// Superquadric |x/ax|^(2/e2) + |y/ay|^(2/e2) raised to e2/e1, plus |z/az|^(2/e1) = 1.
struct PrimitiveParams {
  int category_id = 0;
  double ax = 0.5, ay = 0.5, az = 0.5;
  double e1 = 1.0, e2 = 1.0;
};

/// Canonical shape space: codes in, canonical-pose clouds out.
class ShapeCodec {
public:
  virtual ~ShapeCodec() = default;
  virtual ShapeCode encode(const PrimitiveParams& p) const = 0;
  virtual PointCloud decode(const ShapeCode& code, std::size_t n_points) const = 0;
  /// Project an arbitrary vector onto the set of valid codes.
  virtual ShapeCode nearest(const ShapeCode& code) const = 0;
};

/// Packs (ax, ay, az, e1, e2), a 0.1-scaled category one-hot and a fixed
/// category-keyed pattern into one unit vector.
class SuperquadricCodec final : public ShapeCodec {
public:
  explicit SuperquadricCodec(int num_categories);

  ShapeCode encode(const PrimitiveParams& p) const override;
  PointCloud decode(const ShapeCode& code, std::size_t n_points) const override;
  ShapeCode nearest(const ShapeCode& code) const override;

  /// Inverse packing. With `clamp` the result is forced into the valid ranges.
  PrimitiveParams unpack(const ShapeCode& code, bool clamp = true) const;
  int num_categories() const { return num_categories_; }

private:
  int num_categories_;
  // Template for each category: one-hot block followed by the pattern, as
  // laid out from dim 5 on (before normalization).
  std::vector<std::vector<double>> templates_;
};

/// Deterministic stratified samples on the superquadric surface, symmetric
/// under (x, y, z) -> (-x, y, -z).
PointCloud sample_superquadric(const PrimitiveParams& p, std::size_t n_points);
/// Implicit function value; 1 on the surface.
double superquadric_implicit(const PrimitiveParams& p, const Vec3& x);

}  // namespace g2s
