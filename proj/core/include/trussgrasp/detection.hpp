#pragma once

// Oracle perception front-end: truss detection with injected errors, target
// selection, close-up camera planning, cloud preprocessing and keypoint
// proposal with an error model matched to measured detector statistics.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "trussgrasp/geometry.hpp"
#include "trussgrasp/grasp.hpp"
#include "trussgrasp/rng.hpp"
#include "trussgrasp/scene.hpp"

namespace trussgrasp {

struct Detection {
  OrientedBBox2D obb;
  double confidence = 1.0;
  std::optional<int> truss_id;  // empty for a box on nothing in particular
};

/// Log-normal restricted to (0, cap] by rejection. `mu` is chosen so that the
/// median of the truncated law equals the target median.
struct ErrorDistribution {
  double mu = 0.0;
  double sigma = 0.0;
  double cap = 0.0;

  /// Fit from (q1, median, q3); zero quartiles give the degenerate law at 0.
  static ErrorDistribution fit(const std::array<double, 3>& quartiles, double cap);
  double sample(Rng& rng) const;
  double cdf(double x) const;  // of the truncated law
  bool degenerate() const { return cap <= 0.0 || sigma <= 0.0; }
};

struct DetectorNoiseModel {
  double detect_precision = 0.935;
  double detect_recall = 0.967;
  double kp_precision = 0.89;
  double kp_recall = 0.98;
  std::array<double, 3> kp_pos_error_quartiles = {0.32, 0.58, 0.92};  // mm
  double kp_pos_error_whisker = 1.82;  // mm
  double kp_pos_error_cap = 2.01;  // mm
  std::array<double, 3> kp_angle_error_quartiles = {6.0, 13.5, 23.8};  // degrees
  double kp_angle_error_whisker = 50.6;  // degrees
  double kp_angle_error_cap = 87.8;  // degrees
  /// Side of the square depth window used at keypoint pixels (odd). Zero
  /// intersects the keypoint ray with the target peduncle directly.
  int depth_window = 3;

  /// All rates 1, zero errors, exact depth.
  static DetectorNoiseModel disabled();
  void validate() const;
};

struct PreprocessParams {
  double d_p = 0.05;
  double ransac_threshold = 0.01;
  int ransac_iterations = kDefaultRansacIterations;

  void validate() const;
};

std::vector<Detection> detect_trusses(const SceneAnnotation& annotation,
                                      const DetectorNoiseModel& noise, std::uint64_t seed);

/// Detection whose truss is closest to the camera on average. Detections
/// without a truss count as infinitely far; ties go to the lower truss id.
Detection select_target(const std::vector<Detection>& detections,
                        const SceneAnnotation& annotation);

inline constexpr double kCloseupStandoff = 0.1;

/// Top-down camera 0.1 m above the deprojected box center whose image x axis
/// follows the box's long side.
RigidTransform closeup_camera_pose(const OrientedBBox2D& obb, const RigidTransform& survey_camera,
                                   const DepthImage& survey_depth, const CameraIntrinsics& intr);

/// Maps a box between two top-down views through the horizontal plane
/// z = plane_z (world frame).
OrientedBBox2D transfer_obb(const OrientedBBox2D& obb, const RigidTransform& from_camera,
                            const CameraIntrinsics& from_intr, const RigidTransform& to_camera,
                            const CameraIntrinsics& to_intr, double plane_z);

/// Box filter followed by a RANSAC band of half-width d_p around the dominant plane.
PointCloud preprocess(const PointCloud& cloud, const OrientedBBox2D& obb,
                      const CameraIntrinsics& intr, const PreprocessParams& params,
                      std::uint64_t seed);

/// Noisy keypoints around the target's ground-truth grasps, deprojected with
/// `depth` (the close-up render). Poses are in the camera frame.
std::vector<GraspPose> propose_grasp_keypoints(const TrussModel& target,
                                               const RigidTransform& camera,
                                               const CameraIntrinsics& intr,
                                               const DetectorNoiseModel& noise,
                                               std::uint64_t seed, const DepthImage& depth);

inline constexpr double kKeypointMatchThreshold = 0.003;

struct KeypointEvaluation {
  double precision = 1.0;
  double recall = 0.0;
  std::size_t matched = 0;
  bool no_predictions = false;
  std::vector<double> errors_mm;
  std::vector<double> errors_deg;
};

/// Greedy matching by ascending distance. Distances are measured laterally at
/// the ground-truth depth (the prediction is slid along its camera ray to that
/// depth), which is the image-plane error expressed in meters.
KeypointEvaluation evaluate_keypoints(const std::vector<GraspPose>& predicted,
                                      const std::vector<GraspPose>& truth,
                                      double dist_threshold = kKeypointMatchThreshold);

}  // namespace trussgrasp
