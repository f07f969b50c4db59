#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace g2s {

using Vec3 = std::array<double, 3>;

/// Extents below this are clamped so degenerate clouds still give valid boxes.
inline constexpr double kMinExtent = 1e-3;

/// Yaw-only 3D box. Local axes: w along x, l along y (front), h along z.
/// world = Rz(alpha) * local + centroid; alpha in degrees, kept in [0, 360).
struct OrientedBox {
  double w = 1, l = 1, h = 1;
  double cx = 0, cy = 0, cz = 0;
  double alpha = 0;

  double volume() const { return w * l * h; }
  double bottom() const { return cz - h / 2; }
  double top() const { return cz + h / 2; }
  /// Footprint corners in counter-clockwise order.
  std::array<std::array<double, 2>, 4> footprint() const;
  bool operator==(const OrientedBox&) const = default;
};

using PointCloud = std::vector<Vec3>;

/// n . x + d = 0, |n| = 1.
struct Plane {
  Vec3 normal{0, 0, 1};
  double d = 0;
  double signed_distance(const Vec3& p) const { return normal[0] * p[0] + normal[1] * p[1] + normal[2] * p[2] + d; }
  /// z of the plane above (x, y); requires a non-vertical normal.
  double height_at(double x, double y) const;
};

double normalize_degrees(double a);

struct ObbResult {
  int alpha_hat = 0;  // sweep angle in whole degrees, [0, 90)
  double area = 0;    // top-down area at alpha_hat
  OrientedBox box;    // in the input frame; box.alpha = (-alpha_hat) mod 360
};

/// Minimum top-down-area box over the 1-degree sweep [0, 90). Points are
/// rotated by Rz(alpha) and the axis-aligned extrema box is measured; the
/// first (smallest) alpha achieving the minimum wins.
ObbResult min_area_obb(std::span<const Vec3> pc);

/// Top-down area of the axis-aligned box of the cloud rotated by `alpha_deg`.
double rotated_aabb_area(std::span<const Vec3> pc, double alpha_deg);

/// Quarter-turn `box` by k * 90 degrees, swapping w and l for odd k.
OrientedBox quarter_turn(const OrientedBox& box, int k);
/// Unit world direction of the local +y (front) axis.
std::array<double, 2> front_direction(const OrientedBox& box);

/// Annotation categories: 1 = two symmetry axes (front along the larger
/// extent), 2 = wall-attached (long axis, then side the mass leans to),
/// 3 = manual quarter-turn choice.
OrientedBox canonical_front(const OrientedBox& box, std::span<const Vec3> pc, int category,
                            std::optional<int> manual_choice = std::nullopt);

inline constexpr double kSupportGapThreshold = 0.10;

/// Extend the box down to the support when it floats more than 10 cm above it.
OrientedBox refine_support(const OrientedBox& child, double support_top_z);

struct RansacOptions {
  int iterations = 256;
  double inlier_threshold = 0.02;
  std::uint64_t seed = 0;
};

Plane ransac_plane(std::span<const Vec3> pc, const RansacOptions& opt = {});
/// Least-squares plane through the points (smallest principal direction).
Plane fit_plane(std::span<const Vec3> pc);

/// Area of intersection of two yaw-rotated footprints.
double footprint_intersection(const OrientedBox& a, const OrientedBox& b);
double footprint_iou(const OrientedBox& a, const OrientedBox& b);
/// Exact 3D IoU; `zero_centered` moves both centroids to the origin first.
double box_iou(const OrientedBox& a, const OrientedBox& b, bool zero_centered = false);
bool contains(const OrientedBox& b, const Vec3& p);

/// Symmetric squared-distance chamfer with mean aggregation per direction.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

/// Map a canonical cloud (extent `half` per axis) into the box frame.
PointCloud place_in_box(std::span<const Vec3> canonical, const Vec3& half_extents, const OrientedBox& box);

// Point cloud files: JSON [[x,y,z],...] or binary "G23DPC1" + u64 count + f32 xyz.
std::string write_pointcloud_binary(std::span<const Vec3> pc);
PointCloud read_pointcloud_binary(std::string_view bytes);
std::string write_pointcloud_json(std::span<const Vec3> pc);
PointCloud read_pointcloud_json(std::string_view text);
/// Dispatch on the magic bytes.
PointCloud read_pointcloud(std::string_view bytes);

}  // namespace g2s
