#pragma once

#include <array>
#include <vector>

#include "trussgrasp/geometry.hpp"
#include "trussgrasp/grasp.hpp"

namespace trussgrasp {

struct PatchParams {
  double d_r = 0.02;
  int resolution = 128;

  void validate() const;
};

/// Normalized local depth image around a grasp: row index follows the
/// rotated y axis, column index the rotated x axis (the grasp direction).
/// 0 is the nearest surface, 1 the farthest or nothing at all.
struct GraspPatch {
  int resolution = 0;
  std::vector<float> values;  // row-major
  bool empty = true;

  static GraspPatch background(int resolution);
  float at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * static_cast<std::size_t>(resolution) +
                  static_cast<std::size_t>(col)];
  }
  void validate() const;

  friend bool operator==(const GraspPatch&, const GraspPatch&) = default;
};

/// Points of a camera-frame cloud expressed in the grasp frame (translated to
/// the grasp position, rotated by -yaw), keeping those within d_r in L-inf.
std::vector<Vec3> crop_cloud(const PointCloud& cloud, const GraspPose& grasp, double d_r);

/// Patch cell of a grasp-frame point; -1 outside the crop square.
std::array<int, 2> patch_cell(const Vec3& local, const PatchParams& params);

/// Orthographic top-down depth patch. Each cell keeps its nearest point;
/// depths are min-max normalized over occupied cells.
GraspPatch extract_patch(const PointCloud& cloud, const GraspPose& grasp,
                         const PatchParams& params = {});

GraspPatch flip_ud(const GraspPatch& patch);
GraspPatch flip_lr(const GraspPatch& patch);
GraspPatch rot180(const GraspPatch& patch);

/// {identity, flip_ud, flip_lr, rot180}.
std::array<GraspPatch, 4> augment(const GraspPatch& patch);

}  // namespace trussgrasp
