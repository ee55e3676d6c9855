#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "trussgrasp/geometry.hpp"
#include "trussgrasp/patch.hpp"
#include "trussgrasp/rng.hpp"

namespace testing {

using namespace trussgrasp;

inline constexpr double kPi = std::numbers::pi;

inline CameraIntrinsics small_intrinsics() { return {100.0, 100.0, 64.0, 64.0, 256, 128}; }

/// Random points scattered in a box around `center` (camera frame).
inline PointCloud random_cloud(Rng& rng, std::size_t n, const Vec3& center, double half) {
  PointCloud cloud;
  for (std::size_t i = 0; i < n; ++i)
    cloud.points.push_back(center + Vec3(rng.uniform(-half, half), rng.uniform(-half, half),
                                         rng.uniform(-half, half)));
  return cloud;
}

/// A stem-like ridge through the grasp with a couple of blobs beside it,
/// sampled densely enough to fill most patch cells.
inline PointCloud ridge_cloud(Rng& rng, const Vec3& center, double yaw) {
  PointCloud cloud;
  const Vec3 along(std::cos(yaw), std::sin(yaw), 0.0);
  const Vec3 across(-along.y(), along.x(), 0.0);
  const double stem = rng.uniform(0.0015, 0.003);
  const double offset = rng.uniform(-0.004, 0.004);
  const int blobs = rng.uniform_int(0, 3);
  std::vector<Vec3> blob_centers;
  for (int b = 0; b < blobs; ++b)
    blob_centers.push_back(center + rng.uniform(-0.015, 0.015) * along +
                           rng.uniform(-0.015, 0.015) * across);
  for (int i = 0; i < 3000; ++i) {
    const double s = rng.uniform(-0.025, 0.025);
    const double t = rng.uniform(-0.025, 0.025);
    const Vec3 xy = center + s * along + t * across;
    double z = center.z() + 0.03;  // background
    const double d = std::abs(t - offset);
    if (d < stem) z = center.z() + (stem - std::sqrt(stem * stem - d * d));
    for (const auto& c : blob_centers) {
      const double r = 0.006;
      const double dd = (xy - c).head<2>().norm();
      if (dd < r) z = std::min(z, center.z() - 0.004 + (r - std::sqrt(r * r - dd * dd)));
    }
    cloud.points.push_back(Vec3(xy.x(), xy.y(), z));
  }
  return cloud;
}

/// Largest inlier count over all planes through three of the points.
inline std::size_t brute_force_max_inliers(const std::vector<Vec3>& pts, double threshold) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        const Vec3 n = (pts[j] - pts[i]).cross(pts[k] - pts[i]);
        if (n.norm() < 1e-12) continue;
        const Vec3 u = n.normalized();
        std::size_t count = 0;
        for (const auto& p : pts)
          if (std::abs(u.dot(p - pts[i])) <= threshold) ++count;
        best = std::max(best, count);
      }
  return best;
}


inline GraspPatch synthetic_patch(Rng& rng, const PatchParams& params = {}) {
  const Vec3 center(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.08, 0.12));
  const double yaw = rng.uniform(0.0, kPi);
  const PointCloud cloud = ridge_cloud(rng, center, yaw);
  return extract_patch(cloud, {center, yaw, std::nullopt, Frame::Camera}, params);
}

inline std::vector<GraspPatch> synthetic_patches(std::size_t n, std::uint64_t seed,
                                                 const PatchParams& params = {}) {
  Rng rng(seed);
  std::vector<GraspPatch> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(synthetic_patch(rng, params));
  return out;
}

}  // namespace testing
