#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"
#include "trussgrasp/error.hpp"
#include "trussgrasp/geometry.hpp"
#include "trussgrasp/io.hpp"

using namespace trussgrasp;
using testing::kPi;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidInput;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("deproject follows the pinhole model") {
  const auto intr = testing::small_intrinsics();
  const Vec3 a = deproject({64, 64}, 0.5, intr);
  CHECK(a.isApprox(Vec3(0, 0, 0.5)));
  const Vec3 b = deproject({164, 64}, 1.0, intr);
  CHECK(b.x() == doctest::Approx(1.0));
  CHECK(b.y() == doctest::Approx(0.0));
  CHECK(b.z() == doctest::Approx(1.0));
  CHECK(kind_of([&] { deproject({64, 64}, 0.0, intr); }) == ErrorKind::InvalidInput);
}

TEST_CASE("project inverts deproject") {
  const auto intr = testing::small_intrinsics();
  const auto p = project({0, 0, 0.5}, intr);
  CHECK(p.pixel.isApprox(Vec2(64, 64)));
  CHECK(p.depth == 0.5);
  const auto q = project({1, 0, 1}, intr);
  CHECK(q.pixel.x() == doctest::Approx(164));
  CHECK(q.pixel.y() == doctest::Approx(64));
  CHECK(kind_of([&] { project({0, 0, -0.1}, intr); }) == ErrorKind::BehindCamera);

  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const Vec2 px(rng.uniform(-0.5, 255.5), rng.uniform(-0.5, 127.5));
    const double z = rng.uniform(0.05, 3.0);
    const Vec3 pt = deproject(px, z, intr);
    const auto back = project(pt, intr);
    CHECK((back.pixel - px).norm() < 1e-9);
    CHECK(std::abs(back.depth - z) < 1e-12);
  }
}

TEST_CASE("long axis angle uses the four-quadrant arctangent") {
  OrientedBBox2D horizontal({Vec2(0, 0), Vec2(10, 0), Vec2(10, 2), Vec2(0, 2)});
  CHECK(obb_long_axis_angle(horizontal) == doctest::Approx(0.0));
  OrientedBBox2D vertical({Vec2(0, 0), Vec2(0, 10), Vec2(-2, 10), Vec2(-2, 0)});
  CHECK(obb_long_axis_angle(vertical) == doctest::Approx(kPi / 2));
  const Vec2 w = Vec2(1, -1).normalized() * 0.3;
  OrientedBBox2D diagonal({Vec2(0, 0), Vec2(-1, -1), Vec2(-1, -1) + w, w});
  CHECK(obb_long_axis_angle(diagonal) == doctest::Approx(-3 * kPi / 4));
}

TEST_CASE("long axis angle is a line direction under corner relabeling") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto box = OrientedBBox2D::from_center({rng.uniform(0, 100), rng.uniform(0, 100)},
                                                 rng.uniform(5, 20), rng.uniform(1, 4.9),
                                                 rng.uniform(-kPi, kPi));
    const double ref = obb_long_axis_angle(box);
    auto c = box.corners();
    for (int r = 0; r < 4; ++r) {
      std::rotate(c.begin(), c.begin() + 1, c.end());
      const double a = obb_long_axis_angle(OrientedBBox2D(c));
      CHECK(yaw_distance(a, ref) < 1e-9);
    }
  }
}

TEST_CASE("degenerate boxes are rejected") {
  CHECK(kind_of([] { OrientedBBox2D({Vec2(0, 0), Vec2(0, 0), Vec2(1, 1), Vec2(1, 0)}); }) ==
        ErrorKind::Degenerate);
  CHECK(kind_of([] { OrientedBBox2D({Vec2(0, 0), Vec2(2, 0), Vec2(3, 1), Vec2(0, 1)}); }) ==
        ErrorKind::Degenerate);
}

TEST_CASE("clockwise corners are reordered") {
  OrientedBBox2D box({Vec2(0, 0), Vec2(0, 2), Vec2(10, 2), Vec2(10, 0)});
  CHECK(box.long_side() == doctest::Approx(10));
  CHECK(box.short_side() == doctest::Approx(2));
  CHECK(box.center().isApprox(Vec2(5, 1)));
}

TEST_CASE("ransac finds the dominant plane") {
  PointCloud cloud;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) cloud.points.push_back({0.01 * i, 0.01 * j, 0.0});
  Rng rng(5);
  for (int i = 0; i < 10; ++i)
    cloud.points.push_back({rng.uniform(0, 0.1), rng.uniform(0, 0.1), 0.1});
  const auto r = fit_plane_ransac(cloud, 0.01, 256, 1);
  CHECK(std::abs(std::abs(r.plane.normal.z()) - 1.0) < 1e-9);
  CHECK(r.inlier_count == 100);
  for (std::size_t i = 0; i < cloud.size(); ++i) CHECK(bool(r.inliers[i]) == (i < 100));
}

TEST_CASE("ransac on three points is exact") {
  PointCloud cloud;
  cloud.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  const auto r = fit_plane_ransac(cloud, 1e-6, 10, 0);
  CHECK(std::abs(std::abs(r.plane.normal.z()) - 1.0) < 1e-12);
  CHECK(std::abs(r.plane.offset) < 1e-12);
  CHECK(r.inlier_count == 3);
  cloud.points.pop_back();
  CHECK_THROWS_AS(fit_plane_ransac(cloud, 0.01), Error);
}

TEST_CASE("exhaustive ransac matches brute force") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + rng.below(10);
    PointCloud cloud = testing::random_cloud(rng, n, Vec3(0, 0, 1), 0.05);
    const auto r = fit_plane_ransac(cloud, 0.01, 1000, trial);
    CHECK(r.exhaustive);
    CHECK(r.consensus_count == testing::brute_force_max_inliers(cloud.points, 0.01));
  }
}

TEST_CASE("box filter keeps points that project inside") {
  const auto intr = testing::small_intrinsics();
  OrientedBBox2D box({Vec2(0, 0), Vec2(10, 0), Vec2(10, 10), Vec2(0, 10)});
  PointCloud cloud;
  cloud.points = {deproject({5, 5}, 1.0, intr), deproject({15, 5}, 1.0, intr),
                  deproject({11, 5}, 1.0, intr), deproject({5, 11}, 0.5, intr)};
  const auto kept = filter_by_obb(cloud, box, intr);
  REQUIRE(kept.size() == 1);
  CHECK(kept.points[0].isApprox(cloud.points[0]));
}

TEST_CASE("yaw rotation about a pivot") {
  PointCloud cloud;
  cloud.points = {{0.01, 0, 0}};
  const auto same = rotate_cloud_yaw(cloud, 0.0, Vec3::Zero());
  CHECK(same.points[0] == cloud.points[0]);
  const auto quarter = rotate_cloud_yaw(cloud, kPi / 2, Vec3::Zero());
  CHECK((quarter.points[0] - Vec3(0, -0.01, 0)).norm() < 1e-15);

  Rng rng(9);
  const PointCloud many = testing::random_cloud(rng, 200, Vec3(0.1, -0.2, 0.6), 0.1);
  const Vec3 pivot(0.05, 0.02, 0.5);
  const double theta = 0.73;
  const auto back = rotate_cloud_yaw(rotate_cloud_yaw(many, theta, pivot), -theta, pivot);
  for (std::size_t i = 0; i < many.size(); ++i)
    CHECK((back.points[i] - many.points[i]).norm() < 1e-12);
}

TEST_CASE("minimum-area rectangle contains its points") {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    std::vector<Vec2> pts;
    const double a = rng.uniform(-kPi, kPi);
    const Vec2 u(std::cos(a), std::sin(a)), v(-u.y(), u.x());
    for (int i = 0; i < 40; ++i) pts.push_back(rng.uniform(-20, 20) * u + rng.uniform(-4, 4) * v);
    const auto box = min_area_rect(pts);
    for (const auto& p : pts) CHECK(box.contains(p, 1e-7));
    CHECK(box.area() <= 40.0 * 8.0 + 1e-9);
    CHECK(yaw_distance(obb_long_axis_angle(box), a) < 0.2);
  }
}

TEST_CASE("rigid transforms compose and invert") {
  const auto cam = RigidTransform::look_down({0.1, -0.2, 0.75}, 0.4);
  cam.validate();
  const Vec3 p(0.01, 0.02, 0.3);
  CHECK((cam.inverse().apply(cam.apply(p)) - p).norm() < 1e-12);
  // The optical axis points down.
  CHECK(cam.apply_direction(Vec3::UnitZ()).isApprox(Vec3(0, 0, -1)));
  const auto both = cam * cam.inverse();
  CHECK(both.rotation.isApprox(Mat3::Identity()));
  CHECK(both.translation.norm() < 1e-12);
}

TEST_CASE("angle helpers") {
  CHECK(wrap_angle(3 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(normalize_yaw(-0.1) == doctest::Approx(kPi - 0.1));
  CHECK(normalize_yaw(kPi) == doctest::Approx(0.0));
  CHECK(yaw_distance(0.05, kPi - 0.05) == doctest::Approx(0.1));
}

TEST_CASE("depth to cloud keeps valid pixels only") {
  const CameraIntrinsics intr{50, 50, 1.5, 1.5, 4, 4};
  DepthImage depth(4, 4, 0.5);
  depth.at(0, 0) = 0.0;
  const auto cloud = depth_to_cloud(depth, intr);
  CHECK(cloud.size() == 15);
  for (const auto& p : cloud.points) CHECK(p.z() == 0.5);
  CHECK(depth.median_depth(0, 0, 1) == 0.5);
}

TEST_CASE("point cloud and depth images round-trip through their encodings") {
  Rng rng(2);
  const PointCloud cloud = testing::random_cloud(rng, 57, Vec3(0, 0, 1), 0.2);
  const auto back = io::decode_point_cloud(io::encode_point_cloud(cloud));
  REQUIRE(back.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) CHECK(back.points[i] == cloud.points[i]);
  CHECK_THROWS_AS(io::decode_point_cloud("junk"), Error);

  DepthImage depth(7, 5, 0.0);
  for (int v = 0; v < 5; ++v)
    for (int u = 0; u < 7; ++u) depth.at(u, v) = 0.25 * (u + 1) + 0.5 * v;
  CHECK(io::decode_depth_pfm(io::encode_depth_pfm(depth)) == depth);

  const std::vector<double> values{1.5, -2.25, 1e-300, 0.0};
  CHECK(io::decode_f64_array(io::encode_f64_array(values)) == values);
  CHECK(io::base64_decode(io::base64_encode("tomato")) == "tomato");
}

}  // TEST_SUITE
