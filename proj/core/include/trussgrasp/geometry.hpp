#pragma once

// Camera model, point-cloud transforms, oriented bounding boxes and RANSAC
// plane fitting. Conventions used throughout the library:
//
//  * Camera frame: x right, y down, z along the optical axis (into the scene).
//  * World frame: z up, table plane at z = 0.
//  * A RigidTransform describing a camera maps camera coordinates to world
//    coordinates (p_world = R * p_cam + t).
//  * Pixel (u, v) addresses the center of column u, row v.
//  * Depth images store z along the optical axis; 0.0 marks an invalid pixel.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace trussgrasp {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

double wrap_angle(double angle);  // (-pi, pi]
double normalize_yaw(double yaw);  // [0, pi), parallel-gripper symmetry
double yaw_distance(double a, double b);  // distance between yaws modulo pi, in [0, pi/2]

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;
  bool contains(const Vec2& pixel) const;
};

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  /// Top-down camera at `position` whose image x axis points along world yaw `yaw`.
  static RigidTransform look_down(const Vec3& position, double yaw);
  static RigidTransform from_yaw(const Vec3& translation, double yaw);

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_direction(const Vec3& d) const { return rotation * d; }
  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& other) const;
  void validate() const;
};

enum class Frame { Camera, World };

struct PointCloud {
  std::vector<Vec3> points;
  Frame frame = Frame::Camera;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  PointCloud transformed(const RigidTransform& transform, Frame target) const;
  void validate() const;
};

class DepthImage {
 public:
  DepthImage() = default;
  DepthImage(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  double at(int u, int v) const { return values_[index(u, v)]; }
  double& at(int u, int v) { return values_[index(u, v)]; }
  bool valid(int u, int v) const { return at(u, v) > 0.0; }
  bool in_bounds(int u, int v) const { return u >= 0 && v >= 0 && u < width_ && v < height_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Median of the valid depths in the (2r+1)^2 window around (u, v); 0 if none.
  double median_depth(int u, int v, int radius) const;
  void validate() const;

  friend bool operator==(const DepthImage&, const DepthImage&) = default;

 private:
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(u);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

/// Back-projects every valid pixel into a camera-frame cloud.
PointCloud depth_to_cloud(const DepthImage& depth, const CameraIntrinsics& intr);

/// Rectangle in pixel coordinates, corners stored counter-clockwise (positive
/// signed area in the x/y coordinate plane).
class OrientedBBox2D {
 public:
  static constexpr double kAngleTolerance = 1e-6;

  /// Validates the corners and reorders clockwise input to counter-clockwise.
  explicit OrientedBBox2D(const std::array<Vec2, 4>& corners);
  static OrientedBBox2D from_center(const Vec2& center, double half_length, double half_width,
                                    double angle);

  const std::array<Vec2, 4>& corners() const { return corners_; }
  Vec2 center() const;
  double long_side() const;
  double short_side() const;
  double area() const { return long_side() * short_side(); }
  bool contains(const Vec2& p, double tolerance = 1e-9) const;

 private:
  std::array<Vec2, 4> corners_;
};

struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
  void validate() const;
};

Vec3 deproject(const Vec2& pixel, double depth, const CameraIntrinsics& intr);

struct Projection {
  Vec2 pixel;
  double depth = 0.0;
};

Projection project(const Vec3& point, const CameraIntrinsics& intr);

double obb_long_axis_angle(const OrientedBBox2D& obb);

struct RansacResult {
  Plane plane;
  std::vector<std::uint8_t> inliers;  // one flag per input point
  std::size_t inlier_count = 0;
  /// Inlier count of the best sampled 3-point hypothesis, before the
  /// least-squares refit.
  std::size_t consensus_count = 0;
  bool exhaustive = false;
};

inline constexpr int kDefaultRansacIterations = 256;

/// Hypothesize-and-count plane fit. When `iterations` covers every 3-subset of
/// the cloud, all subsets are enumerated instead of sampled. Ties in inlier
/// count are broken by smaller mean absolute residual, then by the earlier
/// hypothesis. The winner is refit to its inliers by least squares; the refit
/// is kept only if it does not lose inliers.
RansacResult fit_plane_ransac(const PointCloud& cloud, double inlier_threshold,
                              int iterations = kDefaultRansacIterations, std::uint64_t seed = 0);

/// Least-squares plane through the given points (smallest principal direction).
Plane fit_plane_least_squares(std::span<const Vec3> points);

PointCloud filter_by_obb(const PointCloud& cloud, const OrientedBBox2D& obb,
                         const CameraIntrinsics& intr);

PointCloud rotate_cloud_yaw(const PointCloud& cloud, double angle, const Vec3& pivot);

Mat3 rotation_z(double angle);

std::vector<Vec2> convex_hull(std::vector<Vec2> points);

/// Minimum-area enclosing rectangle (rotating calipers over the hull edges).
OrientedBBox2D min_area_rect(std::span<const Vec2> points);

}  // namespace trussgrasp
