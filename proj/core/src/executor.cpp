#include "trussgrasp/executor.hpp"

#include <algorithm>
#include <cmath>

#include "trussgrasp/error.hpp"
#include "trussgrasp/rng.hpp"

namespace trussgrasp {

void GripperParams::validate() const {
  fingers.validate();
  if (!(close_width_epsilon > 0.0 && close_width_epsilon < fingers.max_opening))
    fail(ErrorKind::Config, "close width epsilon must lie in (0, max_opening)");
  if (!(slip_a >= 0.0) || !std::isfinite(slip_b)) fail(ErrorKind::Config, "slip parameters are invalid");
  if (!(force_noise >= 0.0) || !(sensor_baseline >= 0.0))
    fail(ErrorKind::Config, "force parameters must be non-negative");
  if (!(workspace_half_extent > 0.0)) fail(ErrorKind::Config, "workspace must be non-empty");
}

void LabelParams::validate() const {
  if (!(force_threshold > 0.0)) fail(ErrorKind::Config, "force threshold must be positive");
}

std::string to_string(GraspResult r) {
  switch (r) {
    case GraspResult::Success: return "success";
    case GraspResult::PerceptionFailure: return "perception_failure";
    case GraspResult::GripperSlip: return "gripper_slip";
  }
  return "unknown";
}

GraspResult grasp_result_from_string(const std::string& name) {
  if (name == "success") return GraspResult::Success;
  if (name == "perception_failure") return GraspResult::PerceptionFailure;
  if (name == "gripper_slip") return GraspResult::GripperSlip;
  fail(ErrorKind::Config, "unknown grasp result '" + name + "'");
}

GraspOutcome simulate_grasp(const SceneState& scene, const GraspPose& grasp,
                            const GripperParams& gripper, std::uint64_t seed) {
  gripper.validate();
  if (grasp.frame != Frame::World) fail(ErrorKind::InvalidInput, "grasp must be in the world frame");
  if (!grasp.position.allFinite() || std::abs(grasp.position.x()) > gripper.workspace_half_extent ||
      std::abs(grasp.position.y()) > gripper.workspace_half_extent)
    fail(ErrorKind::InvalidInput, "grasp lies outside the workspace");

  Rng rng(derive_seed(seed, 0x9a5));
  const auto parts = scene.world_parts();
  const auto contact = analyze_grasp(parts, grasp.position, grasp.yaw, gripper.fingers);

  GraspOutcome out;
  out.width_after_close = contact.width;
  out.descent_blocked = contact.descent_blocked;
  out.held_before_lift = contact.peduncle_only;
  double load = 0.0;
  if (out.held_before_lift) {
    const TrussModel* truss = scene.find(contact.held_truss);
    if (!truss) fail(ErrorKind::InvariantViolation, "held truss is not in the scene");
    out.held_truss = truss->id;
    const double len = truss->peduncle_length();
    const double d_com = std::abs(truss->peduncle_arc_position(grasp.position) -
                                  truss->peduncle_arc_position(truss->world_mass_center()));
    out.slip_probability =
        gripper.slip_enabled
            ? 1.0 / (1.0 + std::exp(-gripper.slip_a * (d_com / len - gripper.slip_b)))
            : 0.0;
    out.held_at_place = !rng.bernoulli(out.slip_probability);
    if (out.held_at_place) load = truss->mass * kGravity;
  }
  out.force_before_release =
      std::max(0.0, gripper.sensor_baseline + load + rng.normal(0.0, gripper.force_noise));
  out.force_after_release =
      std::max(0.0, gripper.sensor_baseline + rng.normal(0.0, gripper.force_noise));
  out.force_delta = out.force_before_release - out.force_after_release;
  out.result = classify_failure(out, gripper);
  return out;
}

GraspResult classify_failure(const GraspOutcome& outcome, const GripperParams& gripper) {
  if (outcome.held_at_place && !outcome.held_before_lift)
    fail(ErrorKind::InvariantViolation, "truss placed without having been held");
  if (outcome.width_after_close <= gripper.close_width_epsilon) return GraspResult::PerceptionFailure;
  if (outcome.held_at_place) return GraspResult::Success;
  return GraspResult::GripperSlip;
}

int label_grasp(double force_before_release, double force_after_release,
                const LabelParams& params) {
  params.validate();
  if (!(force_before_release >= 0.0) || !(force_after_release >= 0.0))
    fail(ErrorKind::InvalidInput, "forces must be non-negative");
  return force_before_release - force_after_release > params.force_threshold ? 1 : 0;
}

SceneState remove_truss(const SceneState& scene, int truss_id) {
  auto it = std::find_if(scene.trusses.begin(), scene.trusses.end(),
                         [&](const TrussModel& t) { return t.id == truss_id; });
  if (it == scene.trusses.end())
    fail(ErrorKind::NotFound, "truss " + std::to_string(truss_id) + " is not in the scene");
  SceneState out = scene;
  out.trusses.erase(out.trusses.begin() + (it - scene.trusses.begin()));
  settle(out);
  return out;
}

}  // namespace trussgrasp
