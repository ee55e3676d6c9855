#include "trussgrasp/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>

#include "trussgrasp/error.hpp"
#include "trussgrasp/rng.hpp"

namespace trussgrasp {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTomatoDensity = 1000.0;  // kg/m^3

void require(bool ok, const char* what) {
  if (!ok) fail(ErrorKind::Config, what);
}

Vec3 closest_on_segment(const Vec3& p, const Vec3& a, const Vec3& b, double* t_out = nullptr) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  if (t_out) *t_out = t;
  return a + t * ab;
}

}  // namespace

// ---------------------------------------------------------------------------

GraspPose camera_to_world(const GraspPose& pose, const RigidTransform& camera) {
  if (pose.frame == Frame::World) return pose;
  GraspPose out = pose;
  out.frame = Frame::World;
  out.position = camera.apply(pose.position);
  const Vec3 d = camera.apply_direction(Vec3(std::cos(pose.yaw), std::sin(pose.yaw), 0.0));
  out.yaw = normalize_yaw(std::atan2(d.y(), d.x()));
  return out;
}

GraspPose world_to_camera(const GraspPose& pose, const RigidTransform& camera) {
  if (pose.frame == Frame::Camera) return pose;
  const RigidTransform inv = camera.inverse();
  GraspPose out = pose;
  out.frame = Frame::Camera;
  out.position = inv.apply(pose.position);
  const Vec3 d = inv.apply_direction(Vec3(std::cos(pose.yaw), std::sin(pose.yaw), 0.0));
  out.yaw = normalize_yaw(std::atan2(d.y(), d.x()));
  return out;
}

void GraspPose::validate() const {
  if (!position.allFinite() || !std::isfinite(yaw))
    fail(ErrorKind::InvalidInput, "grasp pose is not finite");
  if (yaw < 0.0 || yaw >= kPi) fail(ErrorKind::InvalidInput, "grasp yaw must lie in [0, pi)");
  if (score && (*score < 0.0 || *score > 1.0))
    fail(ErrorKind::InvalidInput, "grasp score must lie in [0, 1]");
}

// ---------------------------------------------------------------------------

void FingerGeometry::validate() const {
  require(width > 0.0 && thickness > 0.0 && length > 0.0 && max_opening > 0.0,
          "finger dimensions must be positive");
  require(grasp_depth >= 0.0, "grasp depth must be non-negative");
}

void TrussGenParams::validate() const {
  require(tomato_count_min >= 3 && tomato_count_max <= 8 && tomato_count_min <= tomato_count_max,
          "tomato count must lie within 3..8");
  require(tomato_radius_min >= 0.015 && tomato_radius_max <= 0.03 &&
              tomato_radius_min <= tomato_radius_max,
          "tomato radius must lie within 0.015..0.03 m");
  require(junction_spacing_min >= 0.006 && junction_spacing_max <= 0.03 &&
              junction_spacing_min <= junction_spacing_max,
          "junction spacing must lie within 0.006..0.03 m");
  require(peduncle_radius > 0.0 && pedicel_radius > 0.0, "stem radii must be positive");
  require(pedicel_length_min > 0.0 && pedicel_length_min <= pedicel_length_max,
          "pedicel length range is invalid");
  require(pedicel_pitch_min >= 0.0 && pedicel_pitch_min <= pedicel_pitch_max &&
              pedicel_pitch_max < 0.5 * kPi,
          "pedicel pitch range is invalid");
  require(proximal_length_min > 0.0 && proximal_length_min <= proximal_length_max,
          "proximal length range is invalid");
  require(distal_length > 0.0 && clearance_margin >= 0.0 && bend >= 0.0 && out_of_plane >= 0.0,
          "peduncle shape parameters are invalid");
  probe.validate();
}

// ---------------------------------------------------------------------------

std::vector<Part> TrussModel::world_parts() const {
  std::vector<Part> parts;
  parts.reserve(peduncle.size() + pedicels.size() + tomatoes.size());
  for (std::size_t i = 0; i + 1 < peduncle.size(); ++i)
    parts.push_back({{pose.apply(peduncle[i]), pose.apply(peduncle[i + 1]), peduncle_radii[i]},
                     PartKind::Peduncle, id, static_cast<int>(i)});
  for (std::size_t i = 0; i < pedicels.size(); ++i) {
    const Vec3 start = peduncle[static_cast<std::size_t>(junctions[pedicels[i].junction])];
    parts.push_back({{pose.apply(start), pose.apply(pedicels[i].end), pedicels[i].radius},
                     PartKind::Pedicel, id, static_cast<int>(i)});
  }
  for (std::size_t i = 0; i < tomatoes.size(); ++i) {
    const Vec3 c = pose.apply(tomatoes[i].center);
    parts.push_back({{c, c, tomatoes[i].radius}, PartKind::Tomato, id, static_cast<int>(i)});
  }
  return parts;
}

double TrussModel::peduncle_length() const {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < peduncle.size(); ++i) len += (peduncle[i + 1] - peduncle[i]).norm();
  return len;
}

double TrussModel::peduncle_arc_position(const Vec3& world_point) const {
  const Vec3 p = pose.inverse().apply(world_point);
  double best_d = std::numeric_limits<double>::infinity();
  double best_arc = 0.0;
  double arc = 0.0;
  for (std::size_t i = 0; i + 1 < peduncle.size(); ++i) {
    double t = 0.0;
    const Vec3 q = closest_on_segment(p, peduncle[i], peduncle[i + 1], &t);
    const double seg = (peduncle[i + 1] - peduncle[i]).norm();
    const double d = (p - q).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best_arc = arc + t * seg;
    }
    arc += seg;
  }
  return best_arc;
}

double TrussModel::min_world_z() const {
  double z = std::numeric_limits<double>::infinity();
  for (const auto& part : world_parts())
    z = std::min({z, part.shape.a.z() - part.shape.radius, part.shape.b.z() - part.shape.radius});
  return z;
}

void TrussModel::validate() const {
  auto bad = [](const char* what) { fail(ErrorKind::InvariantViolation, what); };
  if (peduncle.size() < 2) bad("peduncle needs at least two nodes");
  if (peduncle_radii.size() + 1 != peduncle.size()) bad("one peduncle radius per segment expected");
  for (double r : peduncle_radii)
    if (!(r > 0.0)) bad("peduncle radius must be positive");
  for (int j : junctions)
    if (j < 0 || j >= static_cast<int>(peduncle.size())) bad("junction index out of range");
  std::vector<int> tomato_per_pedicel(pedicels.size(), 0);
  for (const auto& p : pedicels) {
    if (p.junction < 0 || p.junction >= static_cast<int>(junctions.size()))
      bad("pedicel does not start at a junction");
    if (!(p.radius > 0.0)) bad("pedicel radius must be positive");
  }
  for (const auto& t : tomatoes) {
    if (!(t.radius > 0.0)) bad("tomato radius must be positive");
    if (t.pedicel < 0 || t.pedicel >= static_cast<int>(pedicels.size()))
      bad("tomato does not hang on a pedicel");
    ++tomato_per_pedicel[static_cast<std::size_t>(t.pedicel)];
    const double gap = (t.center - pedicels[static_cast<std::size_t>(t.pedicel)].end).norm();
    if (std::abs(gap - t.radius) > 1e-9) bad("tomato is not attached at its pedicel end");
  }
  for (int n : tomato_per_pedicel)
    if (n > 1) bad("a pedicel carries more than one tomato");
  for (const auto& g : grasp_segments) {
    if (g.node < 0 || g.node + 1 >= static_cast<int>(peduncle.size())) bad("grasp segment off the peduncle");
    const Vec3& a = peduncle[static_cast<std::size_t>(g.node)];
    const Vec3& b = peduncle[static_cast<std::size_t>(g.node) + 1];
    if ((closest_on_segment(g.start, a, b) - g.start).norm() > 1e-9 ||
        (closest_on_segment(g.end, a, b) - g.end).norm() > 1e-9)
      bad("grasp segment does not lie on the peduncle");
  }
  pose.validate();
}

// ---------------------------------------------------------------------------

namespace {

// Parts as a list of spheres: capsules are sampled along their axis finely
// enough that the union differs from the capsule by a small fraction of its
// radius.
template <typename Fn>
void for_each_sphere(const Capsule& c, Fn&& fn) {
  const double len = (c.b - c.a).norm();
  const double step = std::max(0.25 * c.radius, 1e-4);
  const int n = len > 0.0 ? static_cast<int>(std::ceil(len / step)) : 0;
  for (int i = 0; i <= n; ++i) {
    const double t = n > 0 ? static_cast<double>(i) / n : 0.0;
    fn(c.a + t * (c.b - c.a), c.radius);
  }
}

double interval_distance(double x, double lo, double hi) {
  if (x < lo) return lo - x;
  if (x > hi) return x - hi;
  return 0.0;
}

struct GripperFrame {
  Vec3 origin;
  Vec2 axis;     // along the grasp (yaw) direction
  Vec2 closing;  // perpendicular, horizontal

  // (along, across, z) coordinates of a world point.
  Vec3 local(const Vec3& p) const {
    const Vec2 d(p.x() - origin.x(), p.y() - origin.y());
    return {d.dot(axis), d.dot(closing), p.z()};
  }
};

// Highest surface point of a sphere over the rectangle
// {along in [a0,a1], across in [c0,c1]}; -inf when the footprints miss.
double sphere_top_over(const Vec3& local, double r, double a0, double a1, double c0, double c1) {
  const double da = interval_distance(local.x(), a0, a1);
  const double dc = interval_distance(local.y(), c0, c1);
  const double e2 = da * da + dc * dc;
  if (e2 >= r * r) return -std::numeric_limits<double>::infinity();
  return local.z() + std::sqrt(r * r - e2);
}

}  // namespace

ContactAnalysis analyze_grasp(std::span<const Part> parts, const Vec3& position, double yaw,
                              const FingerGeometry& fingers) {
  const GripperFrame frame{position, Vec2(std::cos(yaw), std::sin(yaw)),
                           Vec2(-std::sin(yaw), std::cos(yaw))};
  const double half_w = 0.5 * fingers.width;
  const double half_open = 0.5 * fingers.max_opening;
  const double outer = half_open + fingers.thickness;

  ContactAnalysis out;
  out.target_tip_height = position.z() - fingers.grasp_depth;
  double stop = std::max(out.target_tip_height, 0.0);  // the table at z = 0

  // Descent with open fingers.
  for (const auto& part : parts) {
    for_each_sphere(part.shape, [&](const Vec3& c, double r) {
      const Vec3 l = frame.local(c);
      if (std::abs(l.x()) > half_w + r || std::abs(l.y()) > outer + r) return;
      const double top = std::max(sphere_top_over(l, r, -half_w, half_w, half_open, outer),
                                  sphere_top_over(l, r, -half_w, half_w, -outer, -half_open));
      stop = std::max(stop, top);
    });
  }
  out.tip_height = stop;
  out.descent_blocked = stop > out.target_tip_height + 1e-12;

  // Closing: collect the across-axis extent of everything inside the finger gap.
  const double z0 = stop;
  const double z1 = stop + fingers.length;
  double c_min = std::numeric_limits<double>::infinity();
  double c_max = -c_min;
  for (const auto& part : parts) {
    bool hit = false;
    for_each_sphere(part.shape, [&](const Vec3& c, double r) {
      const Vec3 l = frame.local(c);
      const double da = interval_distance(l.x(), -half_w, half_w);
      const double dz = interval_distance(l.z(), z0, z1);
      const double h2 = r * r - da * da - dz * dz;
      if (h2 <= 0.0) return;
      const double h = std::sqrt(h2);
      const double lo = std::max(l.y() - h, -half_open);
      const double hi = std::min(l.y() + h, half_open);
      if (lo > hi) return;
      c_min = std::min(c_min, lo);
      c_max = std::max(c_max, hi);
      hit = true;
    });
    if (hit) out.captured.push_back(part);
  }
  if (out.captured.empty()) return out;

  out.width = c_max - c_min;
  const int truss = out.captured.front().truss_id;
  out.peduncle_only = std::all_of(out.captured.begin(), out.captured.end(), [&](const Part& p) {
    return p.kind == PartKind::Peduncle && p.truss_id == truss;
  });
  if (out.peduncle_only) out.held_truss = truss;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

TrussModel generate_once(Rng& rng, const TrussGenParams& params) {
  TrussModel t;
  const int n = rng.uniform_int(params.tomato_count_min, params.tomato_count_max);

  // Peduncle: bare proximal part, one node per junction, short distal stub.
  std::vector<double> lengths;
  lengths.push_back(rng.uniform(params.proximal_length_min, params.proximal_length_max));
  for (int i = 0; i + 1 < n; ++i)
    lengths.push_back(rng.uniform(params.junction_spacing_min, params.junction_spacing_max));
  lengths.push_back(params.distal_length);

  double heading = 0.0;
  Vec3 node(0.0, 0.0, rng.uniform(-params.out_of_plane, params.out_of_plane));
  t.peduncle.push_back(node);
  for (double len : lengths) {
    heading += rng.uniform(-params.bend, params.bend);
    node += Vec3(len * std::cos(heading), len * std::sin(heading), 0.0);
    node.z() = rng.uniform(-params.out_of_plane, params.out_of_plane);
    t.peduncle.push_back(node);
    t.peduncle_radii.push_back(params.peduncle_radius);
  }
  for (int i = 0; i < n; ++i) t.junctions.push_back(i + 1);

  // Pedicels alternate sides, pitched downwards, each carrying one tomato.
  int side = rng.bernoulli(0.5) ? 1 : -1;
  for (int j = 0; j < n; ++j) {
    const std::size_t k = static_cast<std::size_t>(t.junctions[static_cast<std::size_t>(j)]);
    const Vec3 dir_prev = (t.peduncle[k] - t.peduncle[k - 1]).normalized();
    const double axis_heading = std::atan2(dir_prev.y(), dir_prev.x());
    const double azimuth = axis_heading + side * 0.5 * kPi +
                           rng.uniform(-params.pedicel_spread, params.pedicel_spread);
    const double pitch = rng.uniform(params.pedicel_pitch_min, params.pedicel_pitch_max);
    const Vec3 dir(std::cos(pitch) * std::cos(azimuth), std::cos(pitch) * std::sin(azimuth),
                   -std::sin(pitch));
    const double len = rng.uniform(params.pedicel_length_min, params.pedicel_length_max);
    const double radius = rng.uniform(params.tomato_radius_min, params.tomato_radius_max);
    TrussModel::Pedicel ped{j, t.peduncle[k] + len * dir, params.pedicel_radius};
    t.pedicels.push_back(ped);
    t.tomatoes.push_back({ped.end + radius * dir, radius, j});
    side = -side;
  }

  // Model frame: lowest point on z = 0, tomato centroid on the z axis.
  double min_z = std::numeric_limits<double>::infinity();
  Vec3 centroid = Vec3::Zero();
  for (const auto& tom : t.tomatoes) {
    min_z = std::min(min_z, tom.center.z() - tom.radius);
    centroid += tom.center;
  }
  for (const auto& p : t.peduncle) min_z = std::min(min_z, p.z() - params.peduncle_radius);
  for (const auto& p : t.pedicels) min_z = std::min(min_z, p.end.z() - p.radius);
  centroid /= static_cast<double>(n);
  const Vec3 shift(-centroid.x(), -centroid.y(), -min_z);
  for (auto& p : t.peduncle) p += shift;
  for (auto& p : t.pedicels) p.end += shift;
  for (auto& tom : t.tomatoes) tom.center += shift;

  t.mass = 0.0;
  t.mass_center = Vec3::Zero();
  for (const auto& tom : t.tomatoes) {
    const double m = kTomatoDensity * 4.0 / 3.0 * kPi * std::pow(tom.radius, 3);
    t.mass += m;
    t.mass_center += m * tom.center;
  }
  t.mass_center /= t.mass;

  // Grasp spans: every peduncle segment minus a margin around each pedicel
  // (half a finger width at a free end), kept only when the fingers close on
  // bare peduncle there.
  const auto parts = t.world_parts();
  const double junction_margin = params.clearance_margin + params.pedicel_radius;
  const double end_margin = 0.5 * params.probe.width;
  for (std::size_t i = 0; i + 1 < t.peduncle.size(); ++i) {
    const bool a_junction = i >= 1 && static_cast<int>(i) <= n;
    const bool b_junction = static_cast<int>(i) + 1 <= n;
    const double ma = a_junction ? junction_margin : end_margin;
    const double mb = b_junction ? junction_margin : end_margin;
    const Vec3& a = t.peduncle[i];
    const Vec3& b = t.peduncle[i + 1];
    const double len = (b - a).norm();
    if (len <= ma + mb) continue;
    const Vec3 dir = (b - a) / len;
    TrussModel::GraspSegment seg{a + ma * dir, b - mb * dir, static_cast<int>(i),
                                 0.5 * (len - ma - mb)};
    const Vec3 mid = seg.midpoint();
    const double yaw = std::atan2(dir.y(), dir.x());
    bool clear = true;
    for (double lift : {0.0, params.peduncle_radius}) {
      for (double dyaw : {-0.035, 0.0, 0.035}) {
        const auto contact = analyze_grasp(parts, mid + Vec3(0, 0, lift), yaw + dyaw, params.probe);
        if (!contact.peduncle_only) clear = false;
      }
    }
    if (clear) t.grasp_segments.push_back(seg);
  }
  return t;
}

}  // namespace

TrussModel generate_truss(std::uint64_t seed, const TrussGenParams& params) {
  params.validate();
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    Rng rng(derive_seed(seed, attempt));
    TrussModel t = generate_once(rng, params);
    if (!t.grasp_segments.empty()) {
      t.validate();
      return t;
    }
  }
  fail(ErrorKind::Config, "truss parameters never yield a collision-free grasp span");
}

// ---------------------------------------------------------------------------

std::string to_string(Layout::Kind kind) {
  switch (kind) {
    case Layout::Kind::Isolated: return "isolated";
    case Layout::Kind::SingleLayerClutter: return "clutter";
    case Layout::Kind::Pile: return "pile";
  }
  return "unknown";
}

Layout::Kind layout_from_string(const std::string& name) {
  if (name == "isolated") return Layout::Kind::Isolated;
  if (name == "clutter") return Layout::Kind::SingleLayerClutter;
  if (name == "pile") return Layout::Kind::Pile;
  fail(ErrorKind::Config, "unknown layout '" + name + "'");
}

const TrussModel* SceneState::find(int truss_id) const {
  for (const auto& t : trusses)
    if (t.id == truss_id) return &t;
  return nullptr;
}

std::vector<Part> SceneState::world_parts() const {
  std::vector<Part> parts;
  for (const auto& t : trusses) {
    auto p = t.world_parts();
    parts.insert(parts.end(), p.begin(), p.end());
  }
  return parts;
}

void SceneState::validate() const {
  table.validate();
  for (std::size_t i = 0; i < trusses.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (trusses[i].id == trusses[j].id)
        fail(ErrorKind::InvariantViolation, "duplicate truss id " + std::to_string(trusses[i].id));
  for (const auto& t : trusses) {
    t.validate();
    if (t.min_world_z() < -1e-9) fail(ErrorKind::InvariantViolation, "truss below the table");
    if (t.pose.rotation(2, 2) < 1.0 - 1e-9)
      fail(ErrorKind::InvariantViolation, "truss is not upright (peduncle must face up)");
  }
}

double settle_height(const TrussModel& truss, std::span<const TrussModel> supports) {
  // z offset such that the truss, translated vertically, touches but does not
  // penetrate the table or any support. Works on sphere samples of all parts.
  TrussModel flat = truss;
  flat.pose.translation.z() = 0.0;
  std::vector<std::pair<Vec3, double>> mine;
  for (const auto& part : flat.world_parts())
    for_each_sphere(part.shape, [&](const Vec3& c, double r) { mine.emplace_back(c, r); });
  double lift = -std::numeric_limits<double>::infinity();
  for (const auto& [c, r] : mine) lift = std::max(lift, r - c.z());
  for (const auto& support : supports) {
    for (const auto& part : support.world_parts()) {
      for_each_sphere(part.shape, [&](const Vec3& sc, double sr) {
        for (const auto& [c, r] : mine) {
          const double rr = r + sr;
          const double dx = c.x() - sc.x();
          const double dy = c.y() - sc.y();
          const double d2 = dx * dx + dy * dy;
          if (d2 >= rr * rr) continue;
          lift = std::max(lift, sc.z() + std::sqrt(rr * rr - d2) - c.z());
        }
      });
    }
  }
  return lift;
}

void settle(SceneState& scene) {
  std::vector<TrussModel> settled;
  settled.reserve(scene.trusses.size());
  for (auto& t : scene.trusses) {
    t.pose.translation.z() = settle_height(t, settled);
    settled.push_back(t);
  }
}

SceneState build_scene(std::vector<TrussModel> trusses, const Layout& layout, std::uint64_t seed) {
  if (trusses.empty()) fail(ErrorKind::InvalidInput, "a scene needs at least one truss");
  Rng rng(derive_seed(seed, 0x5ce9e));
  SceneState scene;
  scene.rng_seed = seed;

  auto place = [&](TrussModel t, double x, double y, double yaw) {
    t.pose = RigidTransform::from_yaw(Vec3(x, y, 0.0), yaw);
    t.pose.translation.z() = settle_height(t, scene.trusses);
    scene.trusses.push_back(std::move(t));
  };

  switch (layout.kind) {
    case Layout::Kind::Isolated:
      place(std::move(trusses.front()), 0.0, 0.0, rng.uniform(-kPi, kPi));
      break;
    case Layout::Kind::SingleLayerClutter: {
      // Background trusses on a jittered square grid, each dropped in turn;
      // the target is then dropped on top near the center.
      const std::size_t nb = trusses.size() - 1;
      const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(nb))));
      const double spacing = 0.1;
      for (std::size_t i = 0; i < nb; ++i) {
        const double gx = (static_cast<int>(i) % side - 0.5 * (side - 1)) * spacing;
        const double gy = (static_cast<int>(i) / side - 0.5 * (side - 1)) * spacing;
        place(std::move(trusses[i + 1]), gx + rng.uniform(-0.01, 0.01),
              gy + rng.uniform(-0.01, 0.01), rng.uniform(-kPi, kPi));
      }
      place(std::move(trusses.front()), rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01),
            rng.uniform(-kPi, kPi));
      break;
    }
    case Layout::Kind::Pile: {
      if (layout.pile_size < 1 || static_cast<int>(trusses.size()) != layout.pile_size)
        fail(ErrorKind::InvalidInput, "pile(n) needs exactly n trusses");
      for (auto& t : trusses) {
        const double ang = rng.uniform(0.0, 2.0 * kPi);
        const double rad = 0.12 * std::sqrt(rng.uniform());
        place(std::move(t), rad * std::cos(ang), rad * std::sin(ang), rng.uniform(-kPi, kPi));
      }
      break;
    }
  }
  scene.validate();
  return scene;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

nlohmann::json truss_to_json(const TrussModel& t) {
  nlohmann::json j;
  j["id"] = t.id;
  j["peduncle"] = nlohmann::json::array();
  for (const auto& p : t.peduncle) j["peduncle"].push_back(vec_json(p));
  j["peduncle_radii"] = t.peduncle_radii;
  j["junctions"] = t.junctions;
  j["pedicels"] = nlohmann::json::array();
  for (const auto& p : t.pedicels)
    j["pedicels"].push_back({{"junction", p.junction}, {"end", vec_json(p.end)}, {"radius", p.radius}});
  j["tomatoes"] = nlohmann::json::array();
  for (const auto& tom : t.tomatoes)
    j["tomatoes"].push_back(
        {{"center", vec_json(tom.center)}, {"radius", tom.radius}, {"pedicel", tom.pedicel}});
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(t.pose.rotation(r, c));
  j["pose"] = {{"rotation", rot}, {"translation", vec_json(t.pose.translation)}};
  j["mass_center"] = vec_json(t.mass_center);
  j["mass"] = t.mass;
  j["grasp_segments"] = nlohmann::json::array();
  for (const auto& g : t.grasp_segments)
    j["grasp_segments"].push_back({{"start", vec_json(g.start)},
                                   {"end", vec_json(g.end)},
                                   {"node", g.node},
                                   {"clearance", g.clearance}});
  return j;
}

TrussModel truss_from_json(const nlohmann::json& j) {
  TrussModel t;
  try {
    t.id = j.at("id").get<int>();
    for (const auto& p : j.at("peduncle")) t.peduncle.push_back(json_vec(p));
    t.peduncle_radii = j.at("peduncle_radii").get<std::vector<double>>();
    t.junctions = j.at("junctions").get<std::vector<int>>();
    for (const auto& p : j.at("pedicels"))
      t.pedicels.push_back({p.at("junction").get<int>(), json_vec(p.at("end")),
                            p.at("radius").get<double>()});
    for (const auto& tom : j.at("tomatoes"))
      t.tomatoes.push_back({json_vec(tom.at("center")), tom.at("radius").get<double>(),
                            tom.at("pedicel").get<int>()});
    const auto& rot = j.at("pose").at("rotation");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t.pose.rotation(r, c) = rot.at(r * 3 + c).get<double>();
    t.pose.translation = json_vec(j.at("pose").at("translation"));
    t.mass_center = json_vec(j.at("mass_center"));
    t.mass = j.at("mass").get<double>();
    for (const auto& g : j.at("grasp_segments"))
      t.grasp_segments.push_back({json_vec(g.at("start")), json_vec(g.at("end")),
                                  g.at("node").get<int>(), g.at("clearance").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed truss document: ") + e.what());
  }
  t.validate();
  return t;
}

nlohmann::json scene_to_json(const SceneState& scene) {
  nlohmann::json j;
  j["schema_version"] = kSceneSchemaVersion;
  j["rng_seed"] = scene.rng_seed;
  j["table"] = {{"normal", vec_json(scene.table.normal)}, {"offset", scene.table.offset}};
  j["trusses"] = nlohmann::json::array();
  for (const auto& t : scene.trusses) j["trusses"].push_back(truss_to_json(t));
  return j;
}

SceneState scene_from_json(const nlohmann::json& j) {
  SceneState scene;
  try {
    if (j.at("schema_version").get<int>() != kSceneSchemaVersion)
      fail(ErrorKind::Config, "unsupported scene schema_version");
    scene.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    scene.table.normal = json_vec(j.at("table").at("normal"));
    scene.table.offset = j.at("table").at("offset").get<double>();
    for (const auto& t : j.at("trusses")) scene.trusses.push_back(truss_from_json(t));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed scene document: ") + e.what());
  }
  scene.validate();
  return scene;
}

}  // namespace trussgrasp
