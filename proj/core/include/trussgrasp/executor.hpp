#pragma once

#include <cstdint>
#include <string>

#include "trussgrasp/grasp.hpp"
#include "trussgrasp/scene.hpp"

namespace trussgrasp {

struct GripperParams {
  FingerGeometry fingers;
  double close_width_epsilon = 0.002;
  /// Slip probability sigma(slip_a * (d_com / L - slip_b)).
  double slip_a = 20.0;
  double slip_b = 0.35;
  bool slip_enabled = true;
  double force_noise = 0.05;  // N, standard deviation
  double sensor_baseline = 2.0;  // N, reading with an empty gripper
  double workspace_half_extent = 0.5;  // m, in world x and y

  void validate() const;
};

enum class GraspResult { Success, PerceptionFailure, GripperSlip };

std::string to_string(GraspResult r);
GraspResult grasp_result_from_string(const std::string& name);

struct GraspOutcome {
  GraspResult result = GraspResult::PerceptionFailure;
  double width_after_close = 0.0;
  bool held_before_lift = false;
  bool held_at_place = false;
  bool descent_blocked = false;
  int held_truss = -1;
  double slip_probability = 0.0;
  double force_before_release = 0.0;
  double force_after_release = 0.0;
  double force_delta = 0.0;
};

struct LabelParams {
  double force_threshold = 0.3;

  void validate() const;
};

inline constexpr double kGravity = 9.81;

/// Descends, closes, lifts and places. `grasp` must be in the world frame.
GraspOutcome simulate_grasp(const SceneState& scene, const GraspPose& grasp,
                            const GripperParams& gripper, std::uint64_t seed);

GraspResult classify_failure(const GraspOutcome& outcome, const GripperParams& gripper);

/// 1 when the force drop on release exceeds the threshold (strictly), else 0.
int label_grasp(double force_before_release, double force_after_release,
                const LabelParams& params = {});

/// Scene without the truss; the rest drop vertically until supported.
SceneState remove_truss(const SceneState& scene, int truss_id);

}  // namespace trussgrasp
