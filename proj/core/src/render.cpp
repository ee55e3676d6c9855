#include <algorithm>
#include <cmath>
#include <limits>

#include "trussgrasp/error.hpp"
#include "trussgrasp/scene.hpp"

namespace trussgrasp {

namespace {

struct PixelBox {
  int u0, u1, v0, v1;  // inclusive
  bool empty() const { return u0 > u1 || v0 > v1; }
};

// Range of tan-slopes x/z of the planes through the origin tangent to a
// sphere with camera-frame center (x, z) and radius r; requires z > r.
std::pair<double, double> tangent_slopes(double x, double z, double r) {
  const double den = z * z - r * r;
  const double root = r * std::sqrt(x * x + z * z - r * r);
  return {(x * z - root) / den, (x * z + root) / den};
}

PixelBox screen_box(const Capsule& c, const RigidTransform& world_to_cam,
                    const CameraIntrinsics& intr) {
  const Vec3 center = world_to_cam.apply(0.5 * (c.a + c.b));
  const double r = 0.5 * (c.b - c.a).norm() + c.radius;
  const PixelBox full{0, intr.width - 1, 0, intr.height - 1};
  if (center.z() <= r * (1.0 + 1e-9)) {
    if (center.z() + r <= 0.0) return {0, -1, 0, -1};
    return full;
  }
  const auto [sx0, sx1] = tangent_slopes(center.x(), center.z(), r);
  const auto [sy0, sy1] = tangent_slopes(center.y(), center.z(), r);
  PixelBox box;
  box.u0 = std::max(0, static_cast<int>(std::floor(intr.cx + intr.fx * sx0)) - 1);
  box.u1 = std::min(intr.width - 1, static_cast<int>(std::ceil(intr.cx + intr.fx * sx1)) + 1);
  box.v0 = std::max(0, static_cast<int>(std::floor(intr.cy + intr.fy * sy0)) - 1);
  box.v1 = std::min(intr.height - 1, static_cast<int>(std::ceil(intr.cy + intr.fy * sy1)) + 1);
  return box;
}

std::optional<double> intersect_sphere(const Vec3& o, const Vec3& d, const Vec3& c, double r) {
  const Vec3 oc = o - c;
  const double a = d.dot(d);
  const double b = d.dot(oc);
  const double cc = oc.dot(oc) - r * r;
  const double h = b * b - a * cc;
  if (h < 0.0) return std::nullopt;
  const double t = (-b - std::sqrt(h)) / a;
  if (t <= 0.0) return std::nullopt;
  return t;
}

}  // namespace

std::optional<double> intersect_capsule(const Vec3& origin, const Vec3& dir, const Capsule& c) {
  const Vec3 ba = c.b - c.a;
  const double baba = ba.dot(ba);
  if (baba == 0.0) return intersect_sphere(origin, dir, c.a, c.radius);
  const Vec3 oa = origin - c.a;
  const double bard = ba.dot(dir);
  const double baoa = ba.dot(oa);
  const double rdoa = dir.dot(oa);
  const double oaoa = oa.dot(oa);
  const double rdrd = dir.dot(dir);
  const double qa = baba * rdrd - bard * bard;
  const double qb = baba * rdoa - baoa * bard;
  const double qc = baba * oaoa - baoa * baoa - c.radius * c.radius * baba;
  if (qa > 0.0) {
    const double h = qb * qb - qa * qc;
    if (h < 0.0) return std::nullopt;  // misses the infinite cylinder
    const double t = (-qb - std::sqrt(h)) / qa;
    const double y = baoa + t * bard;
    if (y > 0.0 && y < baba) {
      if (t <= 0.0) return std::nullopt;
      return t;
    }
    return intersect_sphere(origin, dir, y <= 0.0 ? c.a : c.b, c.radius);
  }
  // Ray parallel to the axis: only the caps can be hit first.
  const auto ta = intersect_sphere(origin, dir, c.a, c.radius);
  const auto tb = intersect_sphere(origin, dir, c.b, c.radius);
  if (ta && tb) return std::min(*ta, *tb);
  return ta ? ta : tb;
}

RenderResult render_scene(const SceneState& scene, const RigidTransform& camera,
                          const CameraIntrinsics& intr, std::optional<int> only_truss) {
  intr.validate();
  camera.validate();
  const int w = intr.width;
  const int h = intr.height;
  RenderResult out{DepthImage(w, h, 0.0), std::vector<int>(static_cast<std::size_t>(w) * h, -1)};
  const Mat3& R = camera.rotation;
  const Vec3& origin = camera.translation;

  // Camera-frame rays have unit z, so the hit parameter is the z-depth.
  auto ray = [&](int u, int v) {
    return Vec3(R * Vec3((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0));
  };

  if (!only_truss) {
    const Plane& table = scene.table;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const double denom = table.normal.dot(ray(u, v));
        const double t = (table.offset - table.normal.dot(origin)) / denom;
        if (denom != 0.0 && std::isfinite(t) && t > 0.0) out.depth.at(u, v) = t;
      }
    }
  }

  const RigidTransform world_to_cam = camera.inverse();
  for (const auto& truss : scene.trusses) {
    if (only_truss && truss.id != *only_truss) continue;
    for (const auto& part : truss.world_parts()) {
      const PixelBox box = screen_box(part.shape, world_to_cam, intr);
      if (box.empty()) continue;
      for (int v = box.v0; v <= box.v1; ++v) {
        for (int u = box.u0; u <= box.u1; ++u) {
          const auto t = intersect_capsule(origin, ray(u, v), part.shape);
          if (!t) continue;
          double& d = out.depth.at(u, v);
          if (d == 0.0 || *t < d) {
            d = *t;
            out.truss_id[static_cast<std::size_t>(v) * w + u] = truss.id;
          }
        }
      }
    }
  }
  return out;
}

DepthImage render_depth(const SceneState& scene, const RigidTransform& camera,
                        const CameraIntrinsics& intr) {
  return render_scene(scene, camera, intr).depth;
}

const TrussAnnotation* SceneAnnotation::find(int truss_id) const {
  for (const auto& t : trusses)
    if (t.truss_id == truss_id) return &t;
  return nullptr;
}

std::vector<GraspPose> ground_truth_grasps(const TrussModel& truss, const RigidTransform& camera) {
  const RigidTransform world_to_cam = camera.inverse();
  const auto parts = truss.world_parts();
  std::vector<GraspPose> poses;
  for (const auto& seg : truss.grasp_segments) {
    const Vec3 a = world_to_cam.apply(truss.world_point(seg.start));
    const Vec3 b = world_to_cam.apply(truss.world_point(seg.end));
    const Part& ped = parts[static_cast<std::size_t>(seg.node)];
    // Top of the peduncle straight above the axis midpoint.
    const Vec3 mid = truss.world_point(seg.midpoint());
    const Vec3 above = mid + Vec3(0.0, 0.0, 1.0);
    const auto t = intersect_capsule(above, Vec3(0.0, 0.0, -1.0), ped.shape);
    const Vec3 top = t ? Vec3(above - Vec3(0.0, 0.0, *t)) : Vec3(mid + Vec3(0.0, 0.0, ped.shape.radius));
    const Vec3 cam = world_to_cam.apply(top);
    if (cam.z() <= 0.0) continue;
    GraspPose pose;
    pose.position = cam;
    pose.yaw = normalize_yaw(std::atan2(b.y() - a.y(), b.x() - a.x()));
    pose.frame = Frame::Camera;
    poses.push_back(pose);
  }
  return poses;
}

SceneAnnotation annotate(const SceneState& scene, const RigidTransform& camera,
                         const CameraIntrinsics& intr, double overlap_threshold) {
  if (!(overlap_threshold >= 0.0 && overlap_threshold <= 1.0))
    fail(ErrorKind::InvalidInput, "overlap threshold must lie in [0, 1]");
  const RenderResult full = render_scene(scene, camera, intr);
  const RigidTransform world_to_cam = camera.inverse();
  const int w = intr.width;
  SceneAnnotation out;

  for (const auto& truss : scene.trusses) {
    const RenderResult solo = render_scene(scene, camera, intr, truss.id);
    TrussAnnotation ann;
    ann.truss_id = truss.id;

    // Silhouette outline: the extreme pixels of every row suffice for the hull.
    std::vector<Vec2> outline;
    double visible_depth = 0.0;
    double solo_depth = 0.0;
    for (int v = 0; v < intr.height; ++v) {
      int first = -1, last = -1;
      for (int u = 0; u < w; ++u) {
        const std::size_t idx = static_cast<std::size_t>(v) * w + u;
        if (solo.truss_id[idx] != truss.id) continue;
        if (first < 0) first = u;
        last = u;
        ++ann.silhouette_pixels;
        solo_depth += solo.depth.at(u, v);
        if (full.truss_id[idx] == truss.id) {
          ++ann.visible_pixels;
          visible_depth += full.depth.at(u, v);
        }
      }
      if (first < 0) continue;
      for (int u : {first, last}) {
        outline.emplace_back(u - 0.5, v - 0.5);
        outline.emplace_back(u + 0.5, v - 0.5);
        outline.emplace_back(u - 0.5, v + 0.5);
        outline.emplace_back(u + 0.5, v + 0.5);
      }
    }
    if (ann.silhouette_pixels == 0) {
      out.warning = true;
      continue;
    }
    ann.obb = min_area_rect(outline);
    ann.overlap = 1.0 - static_cast<double>(ann.visible_pixels) /
                            static_cast<double>(ann.silhouette_pixels);
    ann.obstructed = ann.overlap > overlap_threshold;
    // A fully hidden truss falls back to its own silhouette depth.
    ann.mean_depth = ann.visible_pixels > 0
                         ? visible_depth / static_cast<double>(ann.visible_pixels)
                         : solo_depth / static_cast<double>(ann.silhouette_pixels);

    ann.grasp_poses = ground_truth_grasps(truss, camera);
    const Vec3 com = world_to_cam.apply(truss.world_mass_center());
    if (com.z() > 0.0) ann.mass_center_pixel = project(com, intr).pixel;
    out.trusses.push_back(std::move(ann));
  }
  return out;
}

RigidTransform survey_camera(double height) {
  if (!(height > 0.0)) fail(ErrorKind::InvalidInput, "survey height must be positive");
  return RigidTransform::look_down(Vec3(0.0, 0.0, height), 0.0);
}

CameraIntrinsics survey_intrinsics() { return {385.0, 385.0, 319.5, 239.5, 640, 480}; }

CameraIntrinsics closeup_intrinsics() { return {385.0, 385.0, 319.5, 239.5, 640, 480}; }

}  // namespace trussgrasp
