#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "support.hpp"
#include "trussgrasp/detection.hpp"
#include "trussgrasp/error.hpp"

using namespace trussgrasp;
using testing::kPi;

namespace {

SceneState isolated_scene(std::uint64_t seed) {
  return build_scene({generate_truss(seed)}, Layout::isolated(), seed);
}

SceneState two_apart(std::uint64_t seed) {
  TrussModel a = generate_truss(seed), b = generate_truss(seed + 1);
  a.id = 0;
  b.id = 1;
  a.pose = RigidTransform::from_yaw({-0.12, 0.0, 0.0}, 0.1);
  b.pose = RigidTransform::from_yaw({0.12, 0.02, 0.0}, -0.2);
  SceneState s;
  s.trusses = {a, b};
  settle(s);
  return s;
}

SceneState pile(std::uint64_t seed, int n) {
  std::vector<TrussModel> ts;
  for (int i = 0; i < n; ++i) {
    ts.push_back(generate_truss(derive_seed(seed, i)));
    ts.back().id = i;
  }
  return build_scene(ts, Layout::pile(n), seed);
}

GraspPose cam_pose(double x, double y, double z, double yaw = 0.0) {
  return {Vec3(x, y, z), yaw, std::nullopt, Frame::Camera};
}

}  // namespace

TEST_SUITE("detection") {

TEST_CASE("noise-free detection returns every unobstructed truss") {
  const SceneState s = two_apart(30);
  const auto ann = annotate(s, survey_camera(), survey_intrinsics());
  const auto dets = detect_trusses(ann, DetectorNoiseModel::disabled(), 1);
  REQUIRE(dets.size() == 2);
  std::vector<int> ids;
  for (const auto& d : dets) ids.push_back(d.truss_id.value());
  std::sort(ids.begin(), ids.end());
  CHECK(ids == std::vector<int>{0, 1});

  DetectorNoiseModel blind = DetectorNoiseModel::disabled();
  blind.detect_recall = 0.0;
  CHECK(detect_trusses(ann, blind, 1).empty());
}

TEST_CASE("detection recall matches the noise model") {
  const auto ann = annotate(isolated_scene(4), survey_camera(), survey_intrinsics());
  const DetectorNoiseModel noise;
  int found = 0, spurious = 0, total = 0;
  for (int i = 0; i < 10000; ++i) {
    for (const auto& d : detect_trusses(ann, noise, derive_seed(77, i))) {
      ++total;
      CHECK(d.confidence >= 0.0);
      CHECK(d.confidence <= 1.0);
      if (d.truss_id)
        ++found;
      else
        ++spurious;
    }
  }
  CHECK(found / 10000.0 == doctest::Approx(0.967).epsilon(0.01 / 0.967));
  CHECK(static_cast<double>(found) / total == doctest::Approx(0.935).epsilon(0.015 / 0.935));
}

TEST_CASE("detection is deterministic per seed") {
  const auto ann = annotate(pile(5, 10), survey_camera(), survey_intrinsics());
  const auto a = detect_trusses(ann, {}, 99);
  const auto b = detect_trusses(ann, {}, 99);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].truss_id == b[i].truss_id);
    CHECK(a[i].obb.corners() == b[i].obb.corners());
  }
}

TEST_CASE("target selection picks the lowest mean depth") {
  SceneAnnotation ann;
  ann.trusses.resize(2);
  ann.trusses[0].truss_id = 3;
  ann.trusses[0].mean_depth = 0.70;
  ann.trusses[1].truss_id = 8;
  ann.trusses[1].mean_depth = 0.60;
  const auto box = OrientedBBox2D::from_center({10, 10}, 5, 2, 0);
  const std::vector<Detection> dets{{box, 0.9, 3}, {box, 0.8, 8}};
  CHECK(select_target(dets, ann).truss_id == 8);
  CHECK(select_target({dets[0]}, ann).truss_id == 3);
  // Ties go to the lower id; boxes on nothing lose.
  ann.trusses[0].mean_depth = 0.60;
  CHECK(select_target(dets, ann).truss_id == 3);
  CHECK(select_target({{box, 1.0, std::nullopt}, dets[1]}, ann).truss_id == 8);
  try {
    select_target({}, ann);
    FAIL("expected no target");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoTarget);
  }
}

TEST_CASE("target selection agrees with brute force on piles") {
  for (int i = 0; i < 50; ++i) {
    const SceneState s = pile(1000 + i, 10);
    const auto ann = annotate(s, survey_camera(), survey_intrinsics());
    const auto dets = detect_trusses(ann, DetectorNoiseModel::disabled(), i);
    REQUIRE_FALSE(dets.empty());
    double best = std::numeric_limits<double>::infinity();
    int best_id = -1;
    for (const auto& d : dets) {
      const auto* a = ann.find(*d.truss_id);
      if (a->mean_depth < best || (a->mean_depth == best && *d.truss_id < best_id)) {
        best = a->mean_depth;
        best_id = *d.truss_id;
      }
    }
    CHECK(select_target(dets, ann).truss_id == best_id);
  }
}

TEST_CASE("close-up camera sits above the box center") {
  const SceneState s = isolated_scene(6);
  const auto survey = survey_camera();
  const auto intr = survey_intrinsics();
  const DepthImage depth = render_depth(s, survey, intr);
  const auto ann = annotate(s, survey, intr);
  const Vec2 c = ann.trusses[0].obb->center();
  const auto box = OrientedBBox2D::from_center(c, 40, 10, 0.0);
  const auto cam = closeup_camera_pose(box, survey, depth, intr);
  const Vec3 target =
      survey.apply(deproject(c, depth.at(int(std::lround(c.x())), int(std::lround(c.y()))), intr));
  CHECK(cam.translation.z() == doctest::Approx(target.z() + 0.1));
  CHECK((cam.translation.head<2>() - target.head<2>()).norm() < 1e-12);
  // No roll relative to the survey image.
  CHECK((cam.apply_direction(Vec3::UnitX()) - survey.apply_direction(Vec3::UnitX())).norm() < 1e-12);
  CHECK(cam.apply_direction(Vec3::UnitZ()).isApprox(Vec3(0, 0, -1)));
}

TEST_CASE("close-up camera aligns with the long side") {
  const SceneState s = isolated_scene(7);
  const auto survey = survey_camera();
  const auto intr = survey_intrinsics();
  const DepthImage depth = render_depth(s, survey, intr);
  const Vec2 c = annotate(s, survey, intr).trusses[0].obb->center();
  for (double deg : {30.0, -30.0, 75.0, 120.0}) {
    const auto box = OrientedBBox2D::from_center(c, 40, 10, deg * kPi / 180.0);
    const auto cam = closeup_camera_pose(box, survey, depth, intr);
    const double plane_z = cam.translation.z() - kCloseupStandoff;
    const auto seen = transfer_obb(box, survey, intr, cam, closeup_intrinsics(), plane_z);
    CHECK(yaw_distance(obb_long_axis_angle(seen), 0.0) < 1e-6);
  }
}

TEST_CASE("close-up camera needs depth at the box center") {
  const DepthImage empty(640, 480, 0.0);
  const auto box = OrientedBBox2D::from_center({320, 240}, 40, 10, 0.0);
  try {
    closeup_camera_pose(box, survey_camera(), empty, survey_intrinsics());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Degenerate);
  }
}

TEST_CASE("preprocessing drops the far background") {
  const auto intr = testing::small_intrinsics();
  const auto box = OrientedBBox2D::from_center({128, 64}, 127, 63, 0.0);
  Rng rng(8);
  PointCloud cloud;
  for (int i = 0; i < 300; ++i)
    cloud.points.push_back({rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 1.0 + rng.uniform(-0.02, 0.02)});
  for (int i = 0; i < 100; ++i)
    cloud.points.push_back({rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 1.12});
  const auto out = preprocess(cloud, box, intr, {}, 3);
  CHECK(out.size() == 300);
  for (const auto& p : out.points) CHECK(p.z() < 1.05);

  PointCloud flat;
  for (int i = 0; i < 50; ++i) flat.points.push_back({rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.8});
  CHECK(preprocess(flat, box, intr, {}, 3).size() == 50);

  PointCloud two;
  two.points = {{0, 0, 1}, {0.01, 0, 1}, {50, 0, 1}};
  try {
    preprocess(two, box, intr, {}, 3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PreprocessingFailed);
  }
}

TEST_CASE("preprocessing output is an in-box, in-band subset") {
  const auto intr = testing::small_intrinsics();
  Rng rng(31);
  for (int t = 0; t < 20; ++t) {
    const auto box = OrientedBBox2D::from_center({rng.uniform(60, 190), rng.uniform(40, 90)},
                                                 rng.uniform(20, 50), rng.uniform(5, 19),
                                                 rng.uniform(0, kPi));
    const PointCloud cloud = testing::random_cloud(rng, 400, Vec3(0, 0, 1.0), 0.4);
    PointCloud out;
    try {
      out = preprocess(cloud, box, intr, {}, t);
    } catch (const Error&) {
      continue;
    }
    const auto boxed = filter_by_obb(cloud, box, intr);
    const auto plane = fit_plane_ransac(boxed, PreprocessParams{}.ransac_threshold,
                                        PreprocessParams{}.ransac_iterations, t).plane;
    for (const auto& p : out.points) {
      CHECK(std::find(cloud.points.begin(), cloud.points.end(), p) != cloud.points.end());
      CHECK(box.contains(project(p, intr).pixel));
      CHECK(std::abs(plane.signed_distance(p)) <= PreprocessParams{}.d_p + 1e-12);
    }
  }
}

TEST_CASE("noise-free keypoints are the ground truth") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SceneState s = isolated_scene(seed);
    const auto survey = survey_camera();
    const auto sintr = survey_intrinsics();
    const auto ann = annotate(s, survey, sintr);
    const auto cam = closeup_camera_pose(*ann.trusses[0].obb, survey, render_depth(s, survey, sintr), sintr);
    const auto intr = closeup_intrinsics();
    const DepthImage depth = render_depth(s, cam, intr);
    const auto truth = ground_truth_grasps(s.trusses[0], cam);
    const auto kps = propose_grasp_keypoints(s.trusses[0], cam, intr, DetectorNoiseModel::disabled(), 5, depth);
    REQUIRE(kps.size() == truth.size());
    for (std::size_t i = 0; i < kps.size(); ++i) {
      CHECK((kps[i].position - truth[i].position).norm() < 1e-12);
      CHECK(kps[i].yaw == truth[i].yaw);
    }
    const auto ev = evaluate_keypoints(kps, truth);
    CHECK(ev.precision == 1.0);
    CHECK(ev.recall == 1.0);
  }
}

TEST_CASE("error distribution reproduces the measured median") {
  const DetectorNoiseModel noise;
  const auto pos = ErrorDistribution::fit(noise.kp_pos_error_quartiles, noise.kp_pos_error_cap);
  CHECK(pos.cdf(0.58) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(pos.cdf(noise.kp_pos_error_cap) == 1.0);
  const auto ang = ErrorDistribution::fit(noise.kp_angle_error_quartiles, noise.kp_angle_error_cap);
  CHECK(ang.cdf(13.5) == doctest::Approx(0.5).epsilon(1e-6));
  Rng rng(4);
  std::vector<double> draws;
  for (int i = 0; i < 20001; ++i) {
    const double x = pos.sample(rng);
    CHECK(x > 0.0);
    CHECK(x <= noise.kp_pos_error_cap);
    draws.push_back(x);
  }
  std::nth_element(draws.begin(), draws.begin() + 10000, draws.end());
  CHECK(draws[10000] == doctest::Approx(0.58).epsilon(0.05));
  CHECK(ErrorDistribution::fit({0, 0, 0}, 0).degenerate());
}

TEST_CASE("keypoint evaluation examples") {
  const std::vector<GraspPose> truth{cam_pose(0, 0, 0.1), cam_pose(0.05, 0, 0.1)};
  SUBCASE("perfect") {
    const auto ev = evaluate_keypoints(truth, truth);
    CHECK(ev.precision == 1.0);
    CHECK(ev.recall == 1.0);
    for (double e : ev.errors_mm) CHECK(e == 0.0);
  }
  SUBCASE("just outside the threshold") {
    const auto ev = evaluate_keypoints({cam_pose(0.004, 0, 0.1)}, {truth[0]});
    CHECK(ev.precision == 0.0);
    CHECK(ev.recall == 0.0);
  }
  SUBCASE("one near, one far") {
    const auto ev = evaluate_keypoints({cam_pose(0.001, 0, 0.1), cam_pose(0.05, 0.005, 0.1)}, truth);
    CHECK(ev.precision == doctest::Approx(0.5));
    CHECK(ev.recall == doctest::Approx(0.5));
    REQUIRE(ev.errors_mm.size() == 1);
    CHECK(ev.errors_mm[0] == doctest::Approx(1.0));
  }
  SUBCASE("nothing predicted") {
    const auto ev = evaluate_keypoints({}, truth);
    CHECK(ev.precision == 1.0);
    CHECK(ev.recall == 0.0);
    CHECK(ev.no_predictions);
  }
  SUBCASE("bounds on random input") {
    Rng rng(12);
    for (int t = 0; t < 100; ++t) {
      std::vector<GraspPose> p, q;
      for (int i = 0; i < 6; ++i) p.push_back(cam_pose(rng.uniform(0, 0.01), rng.uniform(0, 0.01), 0.1));
      for (int i = 0; i < 4; ++i) q.push_back(cam_pose(rng.uniform(0, 0.01), rng.uniform(0, 0.01), 0.1));
      const auto ev = evaluate_keypoints(p, q);
      CHECK(ev.precision >= 0.0);
      CHECK(ev.precision <= 1.0);
      CHECK(ev.recall >= 0.0);
      CHECK(ev.recall <= 1.0);
    }
  }
}

TEST_CASE("noise parameters are validated") {
  DetectorNoiseModel n;
  n.kp_recall = 1.5;
  CHECK_THROWS_AS(n.validate(), Error);
  DetectorNoiseModel q;
  q.kp_pos_error_quartiles = {0.9, 0.5, 1.0};
  CHECK_THROWS_AS(q.validate(), Error);
  PreprocessParams p;
  p.d_p = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
}

}  // TEST_SUITE
