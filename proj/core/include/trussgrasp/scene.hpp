#pragma once

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trussgrasp/geometry.hpp"
#include "trussgrasp/grasp.hpp"

namespace trussgrasp {

enum class PartKind : std::uint8_t { Peduncle, Pedicel, Tomato };

/// Sphere-swept segment; a sphere when a == b.
struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.0;
};

/// One rigid primitive of a placed truss, in world coordinates.
struct Part {
  Capsule shape;
  PartKind kind = PartKind::Peduncle;
  int truss_id = -1;
  int index = 0;  // index within the truss's list of that kind
};

/// Finger geometry shared by the grasp simulator and the generator's
/// collision-free check. `width` runs along the grasp axis (the peduncle),
/// `thickness` along the closing direction.
struct FingerGeometry {
  double width = 0.01;
  double thickness = 0.004;
  double length = 0.05;
  double max_opening = 0.04;
  /// Fingertips are commanded this far below the keypoint height.
  double grasp_depth = 0.0035;

  void validate() const;
};

struct TrussGenParams {
  int tomato_count_min = 4;
  int tomato_count_max = 7;
  double tomato_radius_min = 0.015;
  double tomato_radius_max = 0.018;
  double junction_spacing_min = 0.014;
  double junction_spacing_max = 0.018;
  double peduncle_radius = 0.0025;
  double pedicel_radius = 0.00075;
  double pedicel_length_min = 0.006;
  double pedicel_length_max = 0.012;
  /// Downward pitch of pedicels below the horizontal, radians.
  double pedicel_pitch_min = 1.0;
  double pedicel_pitch_max = 1.35;
  /// Spread of pedicel headings around the peduncle normal, radians.
  double pedicel_spread = 0.6;
  double proximal_length_min = 0.02;
  double proximal_length_max = 0.035;
  double distal_length = 0.006;
  double bend = 0.08;          // heading change per peduncle node, radians
  double out_of_plane = 0.0008;  // vertical jitter of peduncle nodes, meters
  /// Free length kept on each side of a junction's pedicel (one finger half-width).
  double clearance_margin = 0.005;
  FingerGeometry probe;

  void validate() const;
};

struct TrussModel {
  struct Pedicel {
    int junction = 0;  // index into `junctions`
    Vec3 end = Vec3::Zero();  // calyx point, model frame
    double radius = 0.0;
  };
  struct Tomato {
    Vec3 center = Vec3::Zero();
    double radius = 0.0;
    int pedicel = 0;
  };
  struct GraspSegment {
    Vec3 start = Vec3::Zero();  // model frame, on the peduncle axis
    Vec3 end = Vec3::Zero();
    int node = 0;  // peduncle segment [node, node + 1] holding the span
    double clearance = 0.0;
    Vec3 midpoint() const { return 0.5 * (start + end); }
  };

  int id = 0;
  std::vector<Vec3> peduncle;  // polyline nodes, model frame
  std::vector<double> peduncle_radii;  // one per polyline segment
  std::vector<int> junctions;  // node indices
  std::vector<Pedicel> pedicels;
  std::vector<Tomato> tomatoes;
  RigidTransform pose;  // model -> world
  Vec3 mass_center = Vec3::Zero();  // model frame
  double mass = 0.0;  // kg
  std::vector<GraspSegment> grasp_segments;

  std::vector<Part> world_parts() const;
  double peduncle_length() const;
  /// Arc-length position of the closest point on the peduncle to a world point.
  double peduncle_arc_position(const Vec3& world_point) const;
  Vec3 world_mass_center() const { return pose.apply(mass_center); }
  Vec3 world_point(const Vec3& model_point) const { return pose.apply(model_point); }
  /// Lowest point of the geometry in world z.
  double min_world_z() const;
  void validate() const;
};

struct Layout {
  enum class Kind { Isolated, SingleLayerClutter, Pile };
  Kind kind = Kind::Isolated;
  int pile_size = 0;

  static Layout isolated() { return {Kind::Isolated, 0}; }
  static Layout clutter() { return {Kind::SingleLayerClutter, 0}; }
  static Layout pile(int n) { return {Kind::Pile, n}; }
};

std::string to_string(Layout::Kind kind);
Layout::Kind layout_from_string(const std::string& name);

struct SceneState {
  std::vector<TrussModel> trusses;  // placement order, bottom first
  Plane table;  // z = 0
  std::uint64_t rng_seed = 0;

  const TrussModel* find(int truss_id) const;
  std::vector<Part> world_parts() const;
  void validate() const;
};

struct TrussAnnotation {
  int truss_id = 0;
  bool in_view = true;  // false: nothing of the truss projects into the image
  std::optional<OrientedBBox2D> obb;
  bool obstructed = false;
  double overlap = 0.0;  // fraction of the silhouette hidden by other trusses
  double mean_depth = 0.0;
  std::size_t silhouette_pixels = 0;
  std::size_t visible_pixels = 0;
  std::vector<GraspPose> grasp_poses;  // camera frame
  Vec2 mass_center_pixel = Vec2::Zero();
};

struct SceneAnnotation {
  std::vector<TrussAnnotation> trusses;
  bool warning = false;  // set when a truss was excluded for being out of view

  const TrussAnnotation* find(int truss_id) const;
};

inline constexpr double kDefaultOverlapThreshold = 0.05;
inline constexpr double kSurveyHeight = 0.75;

TrussModel generate_truss(std::uint64_t seed, const TrussGenParams& params = {});

/// Places the trusses per layout. Isolated uses the first truss only; clutter
/// treats the first truss as the target and the rest as the background layer;
/// pile(n) requires exactly n trusses.
SceneState build_scene(std::vector<TrussModel> trusses, const Layout& layout, std::uint64_t seed);

/// Vertical drop: the z translation that rests `truss` (at its current x, y,
/// yaw) on the table or on the given supports.
double settle_height(const TrussModel& truss, std::span<const TrussModel> supports);

/// Re-drops every truss in placement order so nothing floats.
void settle(SceneState& scene);

// --- rendering -----------------------------------------------------------

struct RenderResult {
  DepthImage depth;
  std::vector<int> truss_id;  // -1 for table or nothing
};

/// Renders `scene` from a camera whose pose maps camera to world. When
/// `only_truss` is set, the table and all other trusses are omitted.
RenderResult render_scene(const SceneState& scene, const RigidTransform& camera,
                          const CameraIntrinsics& intr, std::optional<int> only_truss = {});

DepthImage render_depth(const SceneState& scene, const RigidTransform& camera,
                        const CameraIntrinsics& intr);

/// Nearest intersection of a ray with a capsule; `dir` need not be unit.
/// Returns the ray parameter, or nothing on a miss.
std::optional<double> intersect_capsule(const Vec3& origin, const Vec3& dir, const Capsule& c);

/// Camera-frame grasp poses at the grasp-segment midpoints: the top of the
/// peduncle directly above the axis midpoint, with yaw along the segment.
std::vector<GraspPose> ground_truth_grasps(const TrussModel& truss, const RigidTransform& camera);

SceneAnnotation annotate(const SceneState& scene, const RigidTransform& camera,
                         const CameraIntrinsics& intr,
                         double overlap_threshold = kDefaultOverlapThreshold);

/// Camera used for the initial overview image.
RigidTransform survey_camera(double height = kSurveyHeight);
CameraIntrinsics survey_intrinsics();
CameraIntrinsics closeup_intrinsics();

// --- finger contact geometry --------------------------------------------

struct ContactAnalysis {
  double target_tip_height = 0.0;
  double tip_height = 0.0;  // where the descent stopped
  bool descent_blocked = false;
  double width = 0.0;  // finger separation after closing; 0 when nothing is caught
  std::vector<Part> captured;
  bool peduncle_only = false;  // everything caught belongs to one truss's peduncle
  int held_truss = -1;
};

/// Descends two open fingers around `position` (world frame, fingertips
/// commanded to position.z - grasp_depth), stops at first contact under
/// either fingertip, then closes them along the axis perpendicular to `yaw`
/// and reports what ends up between them.
ContactAnalysis analyze_grasp(std::span<const Part> parts, const Vec3& position, double yaw,
                              const FingerGeometry& fingers);

// --- serialization -------------------------------------------------------

inline constexpr int kSceneSchemaVersion = 1;

nlohmann::json scene_to_json(const SceneState& scene);
SceneState scene_from_json(const nlohmann::json& doc);
nlohmann::json truss_to_json(const TrussModel& truss);
TrussModel truss_from_json(const nlohmann::json& doc);

}  // namespace trussgrasp
