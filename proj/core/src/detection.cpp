#include "trussgrasp/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "trussgrasp/error.hpp"

namespace trussgrasp {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kQuartileZ = 0.6744897501960817;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

bool is_rate(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

ErrorDistribution ErrorDistribution::fit(const std::array<double, 3>& q, double cap) {
  if (!(q[0] >= 0.0 && q[0] <= q[1] && q[1] <= q[2]))
    fail(ErrorKind::Config, "error quartiles must be non-negative and nondecreasing");
  ErrorDistribution d;
  if (q[1] <= 0.0 || cap <= 0.0) return d;
  if (!(q[0] > 0.0 && cap > q[1]))
    fail(ErrorKind::Config, "error quartiles must be positive and below the cap");
  d.cap = cap;
  d.sigma = std::log(q[2] / q[0]) / (2.0 * kQuartileZ);
  if (d.sigma <= 0.0) {
    d.mu = std::log(q[1]);
    return d;
  }
  // Median of the truncated law: F(m) = F(cap) / 2 for the untruncated F.
  const double lm = std::log(q[1]);
  const double lc = std::log(cap);
  auto g = [&](double mu) {
    return normal_cdf((lm - mu) / d.sigma) - 0.5 * normal_cdf((lc - mu) / d.sigma);
  };
  double lo = lm;
  double hi = lc + 10.0 * d.sigma;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  d.mu = 0.5 * (lo + hi);
  return d;
}

double ErrorDistribution::sample(Rng& rng) const {
  if (cap <= 0.0) return 0.0;
  if (sigma <= 0.0) return std::min(std::exp(mu), cap);
  for (;;) {
    const double x = std::exp(rng.normal(mu, sigma));
    if (x <= cap) return x;
  }
}

double ErrorDistribution::cdf(double x) const {
  if (x <= 0.0) return cap <= 0.0 ? 1.0 : 0.0;
  if (cap <= 0.0 || x >= cap) return 1.0;
  if (sigma <= 0.0) return x >= std::exp(mu) ? 1.0 : 0.0;
  return normal_cdf((std::log(x) - mu) / sigma) / normal_cdf((std::log(cap) - mu) / sigma);
}

DetectorNoiseModel DetectorNoiseModel::disabled() {
  DetectorNoiseModel m;
  m.detect_precision = m.detect_recall = m.kp_precision = m.kp_recall = 1.0;
  m.kp_pos_error_quartiles = {0.0, 0.0, 0.0};
  m.kp_angle_error_quartiles = {0.0, 0.0, 0.0};
  m.kp_pos_error_whisker = m.kp_pos_error_cap = 0.0;
  m.kp_angle_error_whisker = m.kp_angle_error_cap = 0.0;
  m.depth_window = 0;
  return m;
}

void DetectorNoiseModel::validate() const {
  if (!is_rate(detect_recall) || !is_rate(kp_recall))
    fail(ErrorKind::Config, "recall must lie in [0, 1]");
  if (!(detect_precision > 0.0 && detect_precision <= 1.0) ||
      !(kp_precision > 0.0 && kp_precision <= 1.0))
    fail(ErrorKind::Config, "precision must lie in (0, 1]");
  for (const auto* q : {&kp_pos_error_quartiles, &kp_angle_error_quartiles})
    if (!((*q)[0] >= 0.0 && (*q)[0] <= (*q)[1] && (*q)[1] <= (*q)[2]))
      fail(ErrorKind::Config, "error quartiles must be non-negative and nondecreasing");
  if (kp_pos_error_cap < 0.0 || kp_angle_error_cap < 0.0 || kp_pos_error_whisker < 0.0 ||
      kp_angle_error_whisker < 0.0)
    fail(ErrorKind::Config, "error caps must be non-negative");
  if (depth_window < 0 || (depth_window > 0 && depth_window % 2 == 0) || depth_window > 7)
    fail(ErrorKind::Config, "depth window must be 0 or an odd size up to 7");
}

void PreprocessParams::validate() const {
  if (!(d_p > 0.0)) fail(ErrorKind::Config, "d_p must be positive");
  if (!(ransac_threshold > 0.0)) fail(ErrorKind::Config, "RANSAC threshold must be positive");
  if (ransac_iterations < 1) fail(ErrorKind::Config, "RANSAC needs at least one iteration");
}

// ---------------------------------------------------------------------------

std::vector<Detection> detect_trusses(const SceneAnnotation& annotation,
                                      const DetectorNoiseModel& noise, std::uint64_t seed) {
  noise.validate();
  Rng rng(derive_seed(seed, 0xde7ec7));
  std::vector<const TrussAnnotation*> hidden;
  for (const auto& t : annotation.trusses)
    if (t.obstructed && t.obb) hidden.push_back(&t);

  std::vector<Detection> out;
  const double spurious_rate = 1.0 / noise.detect_precision - 1.0;
  for (const auto& t : annotation.trusses) {
    if (t.obstructed || !t.obb) continue;
    if (!rng.bernoulli(noise.detect_recall)) continue;
    out.push_back({*t.obb, rng.uniform(0.5, 1.0), t.truss_id});
    if (!rng.bernoulli(spurious_rate)) continue;
    // False positives land on a hidden truss when there is one, otherwise on
    // a random patch of the view around the true box.
    if (!hidden.empty()) {
      const auto* h = hidden[rng.below(hidden.size())];
      out.push_back({*h->obb, rng.uniform(0.25, 0.75), h->truss_id});
    } else {
      const Vec2 c = t.obb->center() + Vec2(rng.uniform(-80.0, 80.0), rng.uniform(-80.0, 80.0));
      out.push_back({OrientedBBox2D::from_center(c, rng.uniform(10.0, 40.0), rng.uniform(5.0, 10.0),
                                                 rng.uniform(-kPi, kPi)),
                     rng.uniform(0.25, 0.75), std::nullopt});
    }
  }
  return out;
}

Detection select_target(const std::vector<Detection>& detections,
                        const SceneAnnotation& annotation) {
  if (detections.empty()) fail(ErrorKind::NoTarget, "no detections to choose from");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  auto depth_of = [&](const Detection& d) {
    if (!d.truss_id) return kInf;
    const auto* a = annotation.find(*d.truss_id);
    return a ? a->mean_depth : kInf;
  };
  auto id_of = [](const Detection& d) {
    return d.truss_id.value_or(std::numeric_limits<int>::max());
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < detections.size(); ++i) {
    const double di = depth_of(detections[i]);
    const double db = depth_of(detections[best]);
    if (di < db || (di == db && id_of(detections[i]) < id_of(detections[best]))) best = i;
  }
  return detections[best];
}

RigidTransform closeup_camera_pose(const OrientedBBox2D& obb, const RigidTransform& survey_camera,
                                   const DepthImage& survey_depth, const CameraIntrinsics& intr) {
  const Vec2 c = obb.center();
  const int u = static_cast<int>(std::lround(c.x()));
  const int v = static_cast<int>(std::lround(c.y()));
  if (!survey_depth.in_bounds(u, v) || !survey_depth.valid(u, v))
    fail(ErrorKind::Degenerate, "no valid depth at the box center");
  const Vec3 center = survey_camera.apply(deproject(c, survey_depth.at(u, v), intr));
  const double angle = obb_long_axis_angle(obb);
  const Vec3 axis = survey_camera.apply_direction(Vec3(std::cos(angle), std::sin(angle), 0.0));
  const double psi = std::atan2(axis.y(), axis.x());
  return RigidTransform::look_down(center + Vec3(0.0, 0.0, kCloseupStandoff), psi);
}

OrientedBBox2D transfer_obb(const OrientedBBox2D& obb, const RigidTransform& from_camera,
                            const CameraIntrinsics& from_intr, const RigidTransform& to_camera,
                            const CameraIntrinsics& to_intr, double plane_z) {
  const RigidTransform to_inv = to_camera.inverse();
  std::array<Vec2, 4> mapped;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2& p = obb.corners()[i];
    const Vec3 dir = from_camera.apply_direction(
        Vec3((p.x() - from_intr.cx) / from_intr.fx, (p.y() - from_intr.cy) / from_intr.fy, 1.0));
    if (std::abs(dir.z()) < 1e-12) fail(ErrorKind::Degenerate, "box corner ray is horizontal");
    const double t = (plane_z - from_camera.translation.z()) / dir.z();
    if (t <= 0.0) fail(ErrorKind::BehindCamera, "box plane lies behind the source camera");
    mapped[i] = project(to_inv.apply(from_camera.translation + t * dir), to_intr).pixel;
  }
  return OrientedBBox2D(mapped);
}

PointCloud preprocess(const PointCloud& cloud, const OrientedBBox2D& obb,
                      const CameraIntrinsics& intr, const PreprocessParams& params,
                      std::uint64_t seed) {
  params.validate();
  if (cloud.frame != Frame::Camera) fail(ErrorKind::InvalidInput, "preprocess expects a camera-frame cloud");
  PointCloud boxed = filter_by_obb(cloud, obb, intr);
  if (boxed.size() < 3) fail(ErrorKind::PreprocessingFailed, "fewer than 3 points inside the box");
  RansacResult fit;
  try {
    fit = fit_plane_ransac(boxed, params.ransac_threshold, params.ransac_iterations, seed);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Degenerate) throw;
    fail(ErrorKind::PreprocessingFailed, e.what());
  }
  PointCloud out;
  out.frame = Frame::Camera;
  out.points.reserve(boxed.size());
  for (const auto& p : boxed.points)
    if (std::abs(fit.plane.signed_distance(p)) <= params.d_p) out.points.push_back(p);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct KeypointSampler {
  const RigidTransform& camera;
  const CameraIntrinsics& intr;
  const DepthImage& depth;
  const DetectorNoiseModel& noise;
  std::vector<Part> peduncle;  // world frame

  // Camera-frame point seen at `pixel`, or nothing without usable depth.
  std::optional<Vec3> lookup(const Vec2& pixel) const {
    if (!intr.contains(pixel)) return std::nullopt;
    if (noise.depth_window == 0) {
      const Vec3 dir((pixel.x() - intr.cx) / intr.fx, (pixel.y() - intr.cy) / intr.fy, 1.0);
      const Vec3 world_dir = camera.apply_direction(dir);
      std::optional<double> best;
      for (const auto& p : peduncle) {
        const auto t = intersect_capsule(camera.translation, world_dir, p.shape);
        if (t && (!best || *t < *best)) best = t;
      }
      if (best) return *best * dir;
    }
    const int u = static_cast<int>(std::lround(pixel.x()));
    const int v = static_cast<int>(std::lround(pixel.y()));
    if (!depth.in_bounds(u, v)) return std::nullopt;
    const double z = depth.median_depth(u, v, std::max(noise.depth_window, 1) / 2);
    if (z <= 0.0) return std::nullopt;
    return deproject(pixel, z, intr);
  }
};

}  // namespace

std::vector<GraspPose> propose_grasp_keypoints(const TrussModel& target,
                                               const RigidTransform& camera,
                                               const CameraIntrinsics& intr,
                                               const DetectorNoiseModel& noise,
                                               std::uint64_t seed, const DepthImage& depth) {
  noise.validate();
  intr.validate();
  if (depth.width() != intr.width || depth.height() != intr.height)
    fail(ErrorKind::InvalidInput, "depth image does not match the intrinsics");
  const auto pos_err = ErrorDistribution::fit(noise.kp_pos_error_quartiles, noise.kp_pos_error_cap);
  const auto ang_err =
      ErrorDistribution::fit(noise.kp_angle_error_quartiles, noise.kp_angle_error_cap);
  Rng rng(derive_seed(seed, 0x4b9));

  KeypointSampler sampler{camera, intr, depth, noise, {}};
  const auto parts = target.world_parts();
  for (const auto& p : parts)
    if (p.kind == PartKind::Peduncle) sampler.peduncle.push_back(p);

  const auto truth = ground_truth_grasps(target, camera);
  std::vector<GraspPose> out;
  std::size_t spurious = 0;
  const double spurious_rate = noise.kp_recall * (1.0 / noise.kp_precision - 1.0);
  for (const auto& gt : truth) {
    if (rng.bernoulli(spurious_rate)) ++spurious;
    if (!rng.bernoulli(noise.kp_recall)) continue;
    const double r = pos_err.sample(rng) * 1e-3;
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const double dyaw = ang_err.sample(rng) * kPi / 180.0 * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    if (r == 0.0 && dyaw == 0.0 && noise.depth_window == 0) {
      out.push_back(gt);
      continue;
    }
    const Vec2 pixel = project(gt.position, intr).pixel +
                       Vec2(intr.fx * r * std::cos(phi), intr.fy * r * std::sin(phi)) / gt.position.z();
    const auto pos = sampler.lookup(pixel);
    if (!pos) continue;
    out.push_back({*pos, normalize_yaw(gt.yaw + dyaw), std::nullopt, Frame::Camera});
  }

  // False positives on the other plausible-looking sites of the target.
  std::vector<Vec3> sites;
  for (const auto& p : parts) {
    if (p.kind == PartKind::Pedicel) sites.push_back(0.5 * (p.shape.a + p.shape.b));
    if (p.kind == PartKind::Tomato) sites.push_back(p.shape.a + Vec3(0.0, 0.0, p.shape.radius));
  }
  const RigidTransform world_to_cam = camera.inverse();
  for (std::size_t i = 0; i < spurious && !sites.empty(); ++i) {
    const Vec3 site = world_to_cam.apply(sites[rng.below(sites.size())]);
    const double yaw = rng.uniform(0.0, kPi);
    if (site.z() <= 0.0) continue;
    const Vec2 pixel = project(site, intr).pixel;
    if (!intr.contains(pixel)) continue;
    const int u = static_cast<int>(std::lround(pixel.x()));
    const int v = static_cast<int>(std::lround(pixel.y()));
    const double z = depth.median_depth(u, v, std::max(noise.depth_window, 1) / 2);
    if (z <= 0.0) continue;
    out.push_back({deproject(pixel, z, intr), yaw, std::nullopt, Frame::Camera});
  }
  return out;
}

KeypointEvaluation evaluate_keypoints(const std::vector<GraspPose>& predicted,
                                      const std::vector<GraspPose>& truth,
                                      double dist_threshold) {
  if (!(dist_threshold > 0.0)) fail(ErrorKind::InvalidInput, "match threshold must be positive");
  KeypointEvaluation ev;
  struct Pair {
    double dist;
    std::size_t p, t;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (std::size_t j = 0; j < truth.size(); ++j) {
      const Vec3& p = predicted[i].position;
      const Vec3& t = truth[j].position;
      double d;
      if (p.z() > 0.0 && t.z() > 0.0) {
        const Vec3 slid = p * (t.z() / p.z());
        d = std::hypot(slid.x() - t.x(), slid.y() - t.y());
      } else {
        d = (p - t).norm();
      }
      if (d <= dist_threshold) pairs.push_back({d, i, j});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.dist < b.dist; });
  std::vector<bool> used_p(predicted.size()), used_t(truth.size());
  for (const auto& pr : pairs) {
    if (used_p[pr.p] || used_t[pr.t]) continue;
    used_p[pr.p] = used_t[pr.t] = true;
    ++ev.matched;
    ev.errors_mm.push_back(pr.dist * 1e3);
    ev.errors_deg.push_back(yaw_distance(predicted[pr.p].yaw, truth[pr.t].yaw) * 180.0 / kPi);
  }
  if (predicted.empty()) {
    ev.no_predictions = true;
    ev.precision = 1.0;
  } else {
    ev.precision = static_cast<double>(ev.matched) / static_cast<double>(predicted.size());
  }
  ev.recall = truth.empty() ? 1.0 : static_cast<double>(ev.matched) / static_cast<double>(truth.size());
  if (predicted.empty() && !truth.empty()) ev.recall = 0.0;
  return ev;
}

}  // namespace trussgrasp
