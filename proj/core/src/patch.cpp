#include "trussgrasp/patch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trussgrasp/error.hpp"

namespace trussgrasp {

void PatchParams::validate() const {
  if (!(d_r > 0.0)) fail(ErrorKind::Config, "d_r must be positive");
  if (resolution < 16) fail(ErrorKind::Config, "patch resolution must be at least 16");
}

GraspPatch GraspPatch::background(int resolution) {
  GraspPatch p;
  p.resolution = resolution;
  p.values.assign(static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution), 1.0f);
  p.empty = true;
  return p;
}

void GraspPatch::validate() const {
  if (resolution < 1 ||
      values.size() != static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution))
    fail(ErrorKind::InvalidInput, "patch shape does not match its resolution");
  for (float v : values)
    if (!(v >= 0.0f && v <= 1.0f)) fail(ErrorKind::InvalidInput, "patch value outside [0, 1]");
}

std::vector<Vec3> crop_cloud(const PointCloud& cloud, const GraspPose& grasp, double d_r) {
  if (cloud.frame != grasp.frame) fail(ErrorKind::InvalidInput, "cloud and grasp frames differ");
  const Mat3 rot = rotation_z(-grasp.yaw);
  std::vector<Vec3> out;
  for (const auto& p : cloud.points) {
    const Vec3 q = rot * (p - grasp.position);
    if (q.cwiseAbs().maxCoeff() <= d_r) out.push_back(q);
  }
  return out;
}

std::array<int, 2> patch_cell(const Vec3& local, const PatchParams& params) {
  if (std::abs(local.x()) > params.d_r || std::abs(local.y()) > params.d_r) return {-1, -1};
  const double scale = params.resolution / (2.0 * params.d_r);
  // The nudge keeps points that land on a cell edge up to rounding noise in
  // the upper cell, so rotated copies of a point agree.
  auto cell = [&](double x) {
    const int c = static_cast<int>(std::floor((x + params.d_r) * scale + 1e-9));
    return std::clamp(c, 0, params.resolution - 1);
  };
  return {cell(local.y()), cell(local.x())};
}

GraspPatch extract_patch(const PointCloud& cloud, const GraspPose& grasp,
                         const PatchParams& params) {
  params.validate();
  const int res = params.resolution;
  std::vector<double> nearest(static_cast<std::size_t>(res) * static_cast<std::size_t>(res),
                              std::numeric_limits<double>::infinity());
  for (const auto& q : crop_cloud(cloud, grasp, params.d_r)) {
    const auto [row, col] = patch_cell(q, params);
    double& cell = nearest[static_cast<std::size_t>(row) * static_cast<std::size_t>(res) +
                           static_cast<std::size_t>(col)];
    cell = std::min(cell, q.z());
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double z : nearest) {
    if (!std::isfinite(z)) continue;
    lo = std::min(lo, z);
    hi = std::max(hi, z);
  }
  GraspPatch patch = GraspPatch::background(res);
  if (!std::isfinite(lo)) return patch;
  patch.empty = false;
  const double span = hi - lo;
  for (std::size_t i = 0; i < nearest.size(); ++i) {
    if (!std::isfinite(nearest[i])) continue;
    patch.values[i] = span > 0.0 ? static_cast<float>((nearest[i] - lo) / span) : 0.0f;
  }
  return patch;
}

GraspPatch flip_ud(const GraspPatch& patch) {
  GraspPatch out = patch;
  const auto n = static_cast<std::size_t>(patch.resolution);
  for (std::size_t r = 0; r < n; ++r)
    std::copy_n(patch.values.begin() + static_cast<std::ptrdiff_t>(r * n), n,
                out.values.begin() + static_cast<std::ptrdiff_t>((n - 1 - r) * n));
  return out;
}

GraspPatch flip_lr(const GraspPatch& patch) {
  GraspPatch out = patch;
  const auto n = static_cast<std::size_t>(patch.resolution);
  for (std::size_t r = 0; r < n; ++r)
    std::reverse(out.values.begin() + static_cast<std::ptrdiff_t>(r * n),
                 out.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * n));
  return out;
}

GraspPatch rot180(const GraspPatch& patch) {
  GraspPatch out = patch;
  std::reverse(out.values.begin(), out.values.end());
  return out;
}

std::array<GraspPatch, 4> augment(const GraspPatch& patch) {
  return {patch, flip_ud(patch), flip_lr(patch), rot180(patch)};
}

}  // namespace trussgrasp
