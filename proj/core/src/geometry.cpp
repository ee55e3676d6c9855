#include "trussgrasp/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "trussgrasp/error.hpp"
#include "trussgrasp/rng.hpp"

namespace trussgrasp {

namespace {

constexpr double kPi = std::numbers::pi;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double signed_area(const std::array<Vec2, 4>& c) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) s += cross2(c[i], c[(i + 1) % 4]);
  return 0.5 * s;
}

}  // namespace

double wrap_angle(double angle) {
  double a = std::remainder(angle, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

double normalize_yaw(double yaw) {
  double a = std::fmod(yaw, kPi);
  if (a < 0.0) a += kPi;
  if (a >= kPi) a -= kPi;
  return a;
}

double yaw_distance(double a, double b) {
  const double d = normalize_yaw(a - b);
  return std::min(d, kPi - d);
}

// ---------------------------------------------------------------------------

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorKind::InvalidInput, "focal lengths must be positive");
  if (width <= 0 || height <= 0) fail(ErrorKind::InvalidInput, "image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    fail(ErrorKind::InvalidInput, "principal point outside the image");
}

bool CameraIntrinsics::contains(const Vec2& pixel) const {
  return pixel.x() >= -0.5 && pixel.y() >= -0.5 && pixel.x() <= width - 0.5 &&
         pixel.y() <= height - 0.5;
}

Mat3 rotation_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

RigidTransform RigidTransform::look_down(const Vec3& position, double yaw) {
  RigidTransform t;
  t.rotation = rotation_z(yaw) * Vec3(1.0, -1.0, -1.0).asDiagonal();
  t.translation = position;
  return t;
}

RigidTransform RigidTransform::from_yaw(const Vec3& translation, double yaw) {
  RigidTransform t;
  t.rotation = rotation_z(yaw);
  t.translation = translation;
  return t;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  RigidTransform out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

void RigidTransform::validate() const {
  if (!rotation.allFinite() || !translation.allFinite())
    fail(ErrorKind::InvalidInput, "transform has non-finite entries");
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9)
    fail(ErrorKind::InvalidInput, "rotation is not a proper orthonormal matrix");
}

PointCloud PointCloud::transformed(const RigidTransform& transform, Frame target) const {
  PointCloud out;
  out.frame = target;
  out.points.reserve(points.size());
  for (const auto& p : points) out.points.push_back(transform.apply(p));
  return out;
}

void PointCloud::validate() const {
  for (const auto& p : points)
    if (!p.allFinite()) fail(ErrorKind::InvalidInput, "point cloud contains non-finite coordinates");
}

// ---------------------------------------------------------------------------

DepthImage::DepthImage(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) fail(ErrorKind::InvalidInput, "negative image size");
  values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

double DepthImage::median_depth(int u, int v, int radius) const {
  std::array<double, 49> buf{};
  std::size_t n = 0;
  radius = std::clamp(radius, 0, 3);
  for (int dv = -radius; dv <= radius; ++dv) {
    for (int du = -radius; du <= radius; ++du) {
      const int uu = u + du;
      const int vv = v + dv;
      if (!in_bounds(uu, vv) || !valid(uu, vv)) continue;
      buf[n++] = at(uu, vv);
    }
  }
  if (n == 0) return 0.0;
  auto mid = buf.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(buf.begin(), mid, buf.begin() + static_cast<std::ptrdiff_t>(n));
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(buf.begin(), mid);
  return 0.5 * (lower + upper);
}

void DepthImage::validate() const {
  for (double d : values_)
    if (!std::isfinite(d) || d < 0.0)
      fail(ErrorKind::InvalidInput, "depth image holds a negative or non-finite value");
}

PointCloud depth_to_cloud(const DepthImage& depth, const CameraIntrinsics& intr) {
  PointCloud cloud;
  cloud.frame = Frame::Camera;
  cloud.points.reserve(depth.values().size());
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      const double z = depth.at(u, v);
      if (z <= 0.0) continue;
      cloud.points.emplace_back((u - intr.cx) / intr.fx * z, (v - intr.cy) / intr.fy * z, z);
    }
  }
  return cloud;
}

// ---------------------------------------------------------------------------

OrientedBBox2D::OrientedBBox2D(const std::array<Vec2, 4>& corners) : corners_(corners) {
  for (const auto& c : corners_)
    if (!c.allFinite()) fail(ErrorKind::Degenerate, "bounding box corner is not finite");
  if (signed_area(corners_) < 0.0) std::swap(corners_[1], corners_[3]);
  for (int i = 0; i < 4; ++i) {
    const Vec2 e0 = corners_[(i + 1) % 4] - corners_[i];
    const Vec2 e1 = corners_[(i + 2) % 4] - corners_[(i + 1) % 4];
    if (e0.norm() <= 0.0 || e1.norm() <= 0.0)
      fail(ErrorKind::Degenerate, "bounding box has a zero-length edge");
    const double cos_angle = e0.dot(e1) / (e0.norm() * e1.norm());
    if (std::abs(cos_angle) > std::sin(kAngleTolerance) || cross2(e0, e1) <= 0.0)
      fail(ErrorKind::Degenerate, "bounding box corners do not form a rectangle");
  }
}

OrientedBBox2D OrientedBBox2D::from_center(const Vec2& center, double half_length,
                                           double half_width, double angle) {
  const Vec2 a(std::cos(angle), std::sin(angle));
  const Vec2 b(-a.y(), a.x());
  return OrientedBBox2D({center - half_length * a - half_width * b,
                         center + half_length * a - half_width * b,
                         center + half_length * a + half_width * b,
                         center - half_length * a + half_width * b});
}

Vec2 OrientedBBox2D::center() const {
  return 0.25 * (corners_[0] + corners_[1] + corners_[2] + corners_[3]);
}

double OrientedBBox2D::long_side() const {
  return std::max((corners_[1] - corners_[0]).norm(), (corners_[2] - corners_[1]).norm());
}

double OrientedBBox2D::short_side() const {
  return std::min((corners_[1] - corners_[0]).norm(), (corners_[2] - corners_[1]).norm());
}

bool OrientedBBox2D::contains(const Vec2& p, double tolerance) const {
  for (int i = 0; i < 4; ++i) {
    const Vec2 edge = corners_[(i + 1) % 4] - corners_[i];
    // Signed distance of p to the edge line, positive on the interior side.
    if (cross2(edge, p - corners_[i]) / edge.norm() < -tolerance) return false;
  }
  return true;
}

void Plane::validate() const {
  if (!normal.allFinite() || !std::isfinite(offset))
    fail(ErrorKind::InvalidInput, "plane has non-finite parameters");
  if (std::abs(normal.norm() - 1.0) > 1e-9) fail(ErrorKind::InvalidInput, "plane normal is not unit");
}

// ---------------------------------------------------------------------------

Vec3 deproject(const Vec2& pixel, double depth, const CameraIntrinsics& intr) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    std::ostringstream os;
    os << "cannot deproject with non-positive depth " << depth;
    fail(ErrorKind::InvalidInput, os.str());
  }
  if (!intr.contains(pixel)) fail(ErrorKind::InvalidInput, "pixel outside the image bounds");
  return {(pixel.x() - intr.cx) / intr.fx * depth, (pixel.y() - intr.cy) / intr.fy * depth, depth};
}

Projection project(const Vec3& point, const CameraIntrinsics& intr) {
  if (!(point.z() > 0.0)) fail(ErrorKind::BehindCamera, "point is behind the camera");
  return {Vec2(intr.fx * point.x() / point.z() + intr.cx, intr.fy * point.y() / point.z() + intr.cy),
          point.z()};
}

double obb_long_axis_angle(const OrientedBBox2D& obb) {
  const auto& c = obb.corners();
  int best = 0;
  double best_len = -1.0;
  for (int i = 0; i < 4; ++i) {
    const double len = (c[(i + 1) % 4] - c[i]).norm();
    // Relative slack so that a square resolves to the first edge deterministically.
    if (len > best_len * (1.0 + 1e-12)) {
      best_len = len;
      best = i;
    }
  }
  if (!(best_len > 0.0)) fail(ErrorKind::Degenerate, "degenerate bounding box");
  const Vec2 d = c[(best + 1) % 4] - c[best];
  return wrap_angle(std::atan2(d.y(), d.x()));
}

// ---------------------------------------------------------------------------

Plane fit_plane_least_squares(std::span<const Vec3> points) {
  if (points.size() < 3) fail(ErrorKind::Degenerate, "plane fit needs at least 3 points");
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  Vec3 n = solver.eigenvectors().col(0).normalized();
  Plane plane;
  plane.normal = n;
  plane.offset = n.dot(centroid);
  return plane;
}

namespace {

struct Hypothesis {
  Plane plane;
  std::size_t count = 0;
  double mean_residual = 0.0;
};

std::optional<Plane> plane_through(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double scale = std::max({(b - a).squaredNorm(), (c - a).squaredNorm(), 1e-300});
  if (n.norm() <= 1e-12 * scale) return std::nullopt;
  Plane p;
  p.normal = n.normalized();
  p.offset = p.normal.dot(a);
  return p;
}

void canonicalize(Plane& p) {
  // Deterministic sign: first non-negligible component positive, z first.
  const Vec3& n = p.normal;
  const double key = std::abs(n.z()) > 1e-12 ? n.z() : (std::abs(n.y()) > 1e-12 ? n.y() : n.x());
  if (key < 0.0) {
    p.normal = -p.normal;
    p.offset = -p.offset;
  }
}

Hypothesis score(const Plane& plane, const std::vector<Vec3>& pts, double threshold) {
  Hypothesis h;
  h.plane = plane;
  double residual = 0.0;
  for (const auto& p : pts) {
    const double d = std::abs(plane.signed_distance(p));
    if (d <= threshold) {
      ++h.count;
      residual += d;
    }
  }
  h.mean_residual = h.count > 0 ? residual / static_cast<double>(h.count) : 0.0;
  return h;
}

bool better(const Hypothesis& candidate, const Hypothesis& best) {
  if (candidate.count != best.count) return candidate.count > best.count;
  return candidate.mean_residual < best.mean_residual;
}

bool all_collinear(const std::vector<Vec3>& pts) {
  const Vec3& a = pts.front();
  std::size_t far = 0;
  double far_d = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = (pts[i] - a).squaredNorm();
    if (d > far_d) {
      far_d = d;
      far = i;
    }
  }
  if (far_d <= 0.0) return true;
  const Vec3 dir = (pts[far] - a).normalized();
  for (const auto& p : pts) {
    const Vec3 r = p - a;
    if ((r - r.dot(dir) * dir).norm() > 1e-12 * std::sqrt(far_d)) return false;
  }
  return true;
}

}  // namespace

RansacResult fit_plane_ransac(const PointCloud& cloud, double inlier_threshold, int iterations,
                              std::uint64_t seed) {
  const auto& pts = cloud.points;
  const std::size_t n = pts.size();
  if (n < 3) fail(ErrorKind::Degenerate, "RANSAC plane fit needs at least 3 points");
  if (!(inlier_threshold > 0.0)) fail(ErrorKind::InvalidInput, "inlier threshold must be positive");
  if (iterations < 1) fail(ErrorKind::InvalidInput, "RANSAC needs at least one iteration");
  if (all_collinear(pts)) fail(ErrorKind::Degenerate, "all points are collinear");

  std::optional<Hypothesis> best;
  auto consider = [&](std::size_t i, std::size_t j, std::size_t k) {
    auto plane = plane_through(pts[i], pts[j], pts[k]);
    if (!plane) return;
    canonicalize(*plane);
    Hypothesis h = score(*plane, pts, inlier_threshold);
    if (!best || better(h, *best)) best = h;
  };

  const double triples = static_cast<double>(n) * static_cast<double>(n - 1) *
                         static_cast<double>(n - 2) / 6.0;
  const bool exhaustive = static_cast<double>(iterations) >= triples;
  if (exhaustive) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) consider(i, j, k);
  } else {
    Rng rng(seed);
    for (int it = 0; it < iterations; ++it) {
      const std::size_t i = rng.below(n);
      std::size_t j = rng.below(n - 1);
      if (j >= i) ++j;
      std::size_t k = rng.below(n - 2);
      const std::size_t lo = std::min(i, j);
      const std::size_t hi = std::max(i, j);
      if (k >= lo) ++k;
      if (k >= hi) ++k;
      consider(i, j, k);
    }
    if (!best) {
      // Every sampled triple was collinear; fall back to a guaranteed
      // non-collinear triple (the cloud is known not to be a line).
      std::size_t far = 1;
      for (std::size_t i = 1; i < n; ++i)
        if ((pts[i] - pts[0]).squaredNorm() > (pts[far] - pts[0]).squaredNorm()) far = i;
      const Vec3 dir = (pts[far] - pts[0]).normalized();
      std::size_t off = 0;
      double off_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const Vec3 r = pts[i] - pts[0];
        const double d = (r - r.dot(dir) * dir).norm();
        if (d > off_d) {
          off_d = d;
          off = i;
        }
      }
      consider(0, far, off);
    }
  }

  RansacResult result;
  result.exhaustive = exhaustive;
  result.consensus_count = best->count;
  result.plane = best->plane;

  std::vector<Vec3> inlier_pts;
  inlier_pts.reserve(best->count);
  for (const auto& p : pts)
    if (std::abs(best->plane.signed_distance(p)) <= inlier_threshold) inlier_pts.push_back(p);
  if (inlier_pts.size() >= 3 && !all_collinear(inlier_pts)) {
    Plane refit = fit_plane_least_squares(inlier_pts);
    if (refit.normal.dot(best->plane.normal) < 0.0) {
      refit.normal = -refit.normal;
      refit.offset = -refit.offset;
    }
    std::size_t refit_count = 0;
    for (const auto& p : pts)
      if (std::abs(refit.signed_distance(p)) <= inlier_threshold) ++refit_count;
    if (refit_count >= best->count) result.plane = refit;
  }

  result.inliers.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool in = std::abs(result.plane.signed_distance(pts[i])) <= inlier_threshold;
    result.inliers[i] = in ? 1 : 0;
    result.inlier_count += in ? 1 : 0;
  }
  return result;
}

// ---------------------------------------------------------------------------

PointCloud filter_by_obb(const PointCloud& cloud, const OrientedBBox2D& obb,
                         const CameraIntrinsics& intr) {
  PointCloud out;
  out.frame = cloud.frame;
  for (const auto& p : cloud.points) {
    if (!(p.z() > 0.0)) continue;
    const Vec2 px(intr.fx * p.x() / p.z() + intr.cx, intr.fy * p.y() / p.z() + intr.cy);
    if (obb.contains(px)) out.points.push_back(p);
  }
  return out;
}

PointCloud rotate_cloud_yaw(const PointCloud& cloud, double angle, const Vec3& pivot) {
  const Mat3 r = rotation_z(-angle);
  PointCloud out;
  out.frame = cloud.frame;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(r * (p - pivot) + pivot);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a == b; }),
            pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross2(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

OrientedBBox2D min_area_rect(std::span<const Vec2> points) {
  const auto hull = convex_hull(std::vector<Vec2>(points.begin(), points.end()));
  if (hull.size() < 3) fail(ErrorKind::Degenerate, "minimum-area rectangle needs a 2D point set");
  double best_area = std::numeric_limits<double>::infinity();
  Vec2 best_axis = Vec2::UnitX();
  double best_lo_a = 0, best_hi_a = 0, best_lo_b = 0, best_hi_b = 0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2 edge = hull[(i + 1) % hull.size()] - hull[i];
    if (edge.norm() <= 0.0) continue;
    const Vec2 a = edge.normalized();
    const Vec2 b(-a.y(), a.x());
    double lo_a = std::numeric_limits<double>::infinity(), hi_a = -lo_a;
    double lo_b = lo_a, hi_b = -lo_a;
    for (const auto& p : hull) {
      lo_a = std::min(lo_a, a.dot(p));
      hi_a = std::max(hi_a, a.dot(p));
      lo_b = std::min(lo_b, b.dot(p));
      hi_b = std::max(hi_b, b.dot(p));
    }
    const double area = (hi_a - lo_a) * (hi_b - lo_b);
    if (area < best_area * (1.0 - 1e-12)) {
      best_area = area;
      best_axis = a;
      best_lo_a = lo_a;
      best_hi_a = hi_a;
      best_lo_b = lo_b;
      best_hi_b = hi_b;
    }
  }
  const Vec2 a = best_axis;
  const Vec2 b(-a.y(), a.x());
  return OrientedBBox2D({best_lo_a * a + best_lo_b * b, best_hi_a * a + best_lo_b * b,
                         best_hi_a * a + best_hi_b * b, best_lo_a * a + best_hi_b * b});
}

}  // namespace trussgrasp
