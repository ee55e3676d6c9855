#pragma once

#include <optional>

#include "trussgrasp/geometry.hpp"

namespace trussgrasp {

/// Top-down 4D grasp: position plus yaw about the vertical / optical axis.
/// Yaw lives in [0, pi) since a parallel gripper is symmetric. For camera-frame
/// poses the yaw is the image-plane angle (x right, y down); for world-frame
/// poses it is measured counter-clockwise about world z.
struct GraspPose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  std::optional<double> score;
  Frame frame = Frame::Camera;

  void validate() const;
};

/// Re-expresses a pose given in a top-down camera's frame in world coordinates.
GraspPose camera_to_world(const GraspPose& pose, const RigidTransform& camera);
GraspPose world_to_camera(const GraspPose& pose, const RigidTransform& camera);

}  // namespace trussgrasp
