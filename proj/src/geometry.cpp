#include "g2s/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "g2s/error.hpp"
#include "g2s/rng.hpp"

namespace g2s {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

using Poly = std::vector<std::array<double, 2>>;

double cross2(const std::array<double, 2>& o, const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

double polygon_area(const Poly& p) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& a = p[i];
    const auto& b = p[(i + 1) % p.size()];
    s += a[0] * b[1] - a[1] * b[0];
  }
  return std::abs(s) / 2;
}

// Sutherland-Hodgman: clip `subject` by the convex counter-clockwise `clip`.
Poly clip_convex(Poly subject, const Poly& clip) {
  for (std::size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
    const auto& a = clip[i];
    const auto& b = clip[(i + 1) % clip.size()];
    Poly out;
    for (std::size_t k = 0; k < subject.size(); ++k) {
      const auto& p = subject[k];
      const auto& q = subject[(k + 1) % subject.size()];
      const double dp = cross2(a, b, p);
      const double dq = cross2(a, b, q);
      const bool pin = dp >= 0;
      const bool qin = dq >= 0;
      if (pin) out.push_back(p);
      if (pin != qin) {
        const double t = dp / (dp - dq);
        out.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
      }
    }
    subject = std::move(out);
  }
  return subject;
}

Poly to_poly(const OrientedBox& b) {
  auto f = b.footprint();
  return Poly(f.begin(), f.end());
}

}  // namespace

double normalize_degrees(double a) {
  double r = std::fmod(a, 360.0);
  if (r < 0) r += 360.0;
  if (r >= 360.0) r -= 360.0;
  return r;
}

std::array<std::array<double, 2>, 4> OrientedBox::footprint() const {
  const double c = std::cos(alpha * kDeg), s = std::sin(alpha * kDeg);
  const double hw = w / 2, hl = l / 2;
  const std::array<std::array<double, 2>, 4> local{{{-hw, -hl}, {hw, -hl}, {hw, hl}, {-hw, hl}}};
  std::array<std::array<double, 2>, 4> out{};
  for (std::size_t i = 0; i < 4; ++i)
    out[i] = {cx + c * local[i][0] - s * local[i][1], cy + s * local[i][0] + c * local[i][1]};
  return out;
}

double Plane::height_at(double x, double y) const {
  if (std::abs(normal[2]) < 1e-12) throw Error("plane is vertical; no height defined");
  return -(normal[0] * x + normal[1] * y + d) / normal[2];
}

double rotated_aabb_area(std::span<const Vec3> pc, double alpha_deg) {
  const double c = std::cos(alpha_deg * kDeg), s = std::sin(alpha_deg * kDeg);
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& p : pc) {
    const double x = c * p[0] - s * p[1];
    const double y = s * p[0] + c * p[1];
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  return (xmax - xmin) * (ymax - ymin);
}

ObbResult min_area_obb(std::span<const Vec3> pc) {
  if (pc.size() < 2) throw Error("min_area_obb: need at least two points");
  double spread = 0;
  for (const auto& p : pc) spread = std::max({spread, std::abs(p[0] - pc[0][0]), std::abs(p[1] - pc[0][1])});
  if (spread < 1e-12) throw Error("min_area_obb: all points coincide in the xy-plane");
  for (const auto& p : pc)
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) throw Error("min_area_obb: non-finite point");

  ObbResult best;
  best.area = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 90; ++a) {
    const double area = rotated_aabb_area(pc, a);
    if (area < best.area) {
      best.area = area;
      best.alpha_hat = a;
    }
  }

  const double c = std::cos(best.alpha_hat * kDeg), s = std::sin(best.alpha_hat * kDeg);
  double lo[3], hi[3];
  for (int k = 0; k < 3; ++k) {
    lo[k] = std::numeric_limits<double>::infinity();
    hi[k] = -lo[k];
  }
  for (const auto& p : pc) {
    const double q[3] = {c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], q[k]);
      hi[k] = std::max(hi[k], q[k]);
    }
  }
  const double mx = (lo[0] + hi[0]) / 2, my = (lo[1] + hi[1]) / 2;
  OrientedBox& b = best.box;
  b.w = std::max(hi[0] - lo[0], kMinExtent);
  b.l = std::max(hi[1] - lo[1], kMinExtent);
  b.h = std::max(hi[2] - lo[2], kMinExtent);
  // Back to the input frame: Rz(-alpha_hat).
  b.cx = c * mx + s * my;
  b.cy = -s * mx + c * my;
  b.cz = (lo[2] + hi[2]) / 2;
  b.alpha = normalize_degrees(-static_cast<double>(best.alpha_hat));
  return best;
}

OrientedBox quarter_turn(const OrientedBox& box, int k) {
  k = ((k % 4) + 4) % 4;
  OrientedBox out = box;
  out.alpha = normalize_degrees(box.alpha + 90.0 * k);
  if (k % 2 == 1) std::swap(out.w, out.l);
  return out;
}

std::array<double, 2> front_direction(const OrientedBox& box) {
  const double a = box.alpha * kDeg;
  return {-std::sin(a), std::cos(a)};
}

OrientedBox canonical_front(const OrientedBox& box, std::span<const Vec3> pc, int category,
                            std::optional<int> manual_choice) {
  switch (category) {
    case 1:
      return box.w > box.l ? quarter_turn(box, 1) : box;
    case 2: {
      OrientedBox out = box.w > box.l ? quarter_turn(box, 1) : box;
      if (pc.empty()) return out;
      const auto f = front_direction(out);
      double lean = 0;
      for (const auto& p : pc) lean += (p[0] - out.cx) * f[0] + (p[1] - out.cy) * f[1];
      lean /= static_cast<double>(pc.size());
      if (lean < -1e-6) out = quarter_turn(out, 2);
      return out;
    }
    case 3:
      if (!manual_choice) throw Error("canonical_front: category 3 requires a manual front choice");
      if (*manual_choice < 0 || *manual_choice > 3) throw Error("canonical_front: manual choice must be in 0..3");
      return quarter_turn(box, *manual_choice);
    default:
      throw Error("canonical_front: annotation category must be 1, 2 or 3");
  }
}

OrientedBox refine_support(const OrientedBox& child, double support_top_z) {
  const double gap = child.bottom() - support_top_z;
  if (gap <= kSupportGapThreshold) return child;
  OrientedBox out = child;
  out.h += gap;
  out.cz -= gap / 2;
  return out;
}

namespace {

void orient_normal(Vec3& n) {
  int k = 2;
  if (std::abs(n[2]) < 1e-12) k = std::abs(n[1]) < 1e-12 ? 0 : 1;
  if (n[static_cast<std::size_t>(k)] < 0)
    for (auto& c : n) c = -c;
}

}  // namespace

Plane fit_plane(std::span<const Vec3> pc) {
  if (pc.size() < 3) throw Error("fit_plane: need at least three points");
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pc) mean += Eigen::Vector3d(p[0], p[1], p[2]);
  mean /= static_cast<double>(pc.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pc) {
    const Eigen::Vector3d d = Eigen::Vector3d(p[0], p[1], p[2]) - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  if (es.eigenvalues()(1) <= 1e-18 * std::max(1.0, es.eigenvalues()(2))) throw Error("fit_plane: points are collinear");
  Eigen::Vector3d n = es.eigenvectors().col(0).normalized();
  Plane pl;
  pl.normal = {n(0), n(1), n(2)};
  orient_normal(pl.normal);
  pl.d = -(pl.normal[0] * mean(0) + pl.normal[1] * mean(1) + pl.normal[2] * mean(2));
  return pl;
}

Plane ransac_plane(std::span<const Vec3> pc, const RansacOptions& opt) {
  if (pc.size() < 3) throw Error("ransac_plane: need at least three points");
  Rng rng(opt.seed);
  const std::size_t n = pc.size();
  std::optional<Plane> best;
  std::size_t best_count = 0;
  for (int it = 0; it < opt.iterations; ++it) {
    const std::size_t i = rng.below(n);
    std::size_t j = rng.below(n - 1);
    if (j >= i) ++j;
    std::size_t k = rng.below(n - 2);
    if (k >= std::min(i, j)) ++k;
    if (k >= std::max(i, j)) ++k;
    const Vec3 &a = pc[i], &b = pc[j], &c = pc[k];
    const Vec3 u{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const Vec3 v{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    Vec3 nrm{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
    const double len = std::sqrt(nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]);
    const double scale = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]) * std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (len <= 1e-12 * std::max(scale, 1e-300)) continue;
    for (auto& x : nrm) x /= len;
    orient_normal(nrm);
    Plane h{nrm, -(nrm[0] * a[0] + nrm[1] * a[1] + nrm[2] * a[2])};
    std::size_t count = 0;
    for (const auto& p : pc)
      if (std::abs(h.signed_distance(p)) < opt.inlier_threshold) ++count;
    if (!best || count > best_count) {
      best = h;
      best_count = count;
    }
  }
  if (!best) throw Error("ransac_plane: every hypothesis was collinear");
  PointCloud inliers;
  for (const auto& p : pc)
    if (std::abs(best->signed_distance(p)) < opt.inlier_threshold) inliers.push_back(p);
  Plane out = *best;
  if (inliers.size() >= 3) {
    try {
      out = fit_plane(inliers);
    } catch (const Error&) {
      // inliers degenerate (e.g. collinear); keep the hypothesis
    }
  }
  if (out.normal[2] * best->normal[2] + out.normal[1] * best->normal[1] + out.normal[0] * best->normal[0] < 0) {
    for (auto& c : out.normal) c = -c;
    out.d = -out.d;
  }
  return out;
}

double footprint_intersection(const OrientedBox& a, const OrientedBox& b) {
  const Poly inter = clip_convex(to_poly(a), to_poly(b));
  return inter.size() < 3 ? 0.0 : polygon_area(inter);
}

double footprint_iou(const OrientedBox& a, const OrientedBox& b) {
  const double inter = footprint_intersection(a, b);
  const double uni = a.w * a.l + b.w * b.l - inter;
  return uni > 0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double box_iou(const OrientedBox& a0, const OrientedBox& b0, bool zero_centered) {
  OrientedBox a = a0, b = b0;
  if (zero_centered) {
    a.cx = a.cy = a.cz = 0;
    b.cx = b.cy = b.cz = 0;
  }
  const double zover = std::min(a.top(), b.top()) - std::max(a.bottom(), b.bottom());
  if (zover <= 0) return 0.0;
  const double inter = footprint_intersection(a, b) * zover;
  const double uni = a.volume() + b.volume() - inter;
  return uni > 0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

bool contains(const OrientedBox& b, const Vec3& p) {
  const double c = std::cos(b.alpha * kDeg), s = std::sin(b.alpha * kDeg);
  const double dx = p[0] - b.cx, dy = p[1] - b.cy;
  const double lx = c * dx + s * dy, ly = -s * dx + c * dy;
  return std::abs(lx) <= b.w / 2 && std::abs(ly) <= b.l / 2 && std::abs(p[2] - b.cz) <= b.h / 2;
}

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw Error("chamfer: point clouds must be nonempty");
  auto directed = [](std::span<const Vec3> from, std::span<const Vec3> to) {
    double sum = 0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) {
        const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      sum += best;
    }
    return sum / static_cast<double>(from.size());
  };
  return directed(a, b) + directed(b, a);
}

PointCloud place_in_box(std::span<const Vec3> canonical, const Vec3& half, const OrientedBox& box) {
  const double c = std::cos(box.alpha * kDeg), s = std::sin(box.alpha * kDeg);
  const double sx = box.w / 2 / half[0], sy = box.l / 2 / half[1], sz = box.h / 2 / half[2];
  PointCloud out;
  out.reserve(canonical.size());
  for (const auto& p : canonical) {
    const double x = p[0] * sx, y = p[1] * sy, z = p[2] * sz;
    out.push_back({box.cx + c * x - s * y, box.cy + s * x + c * y, box.cz + z});
  }
  return out;
}

}  // namespace g2s
