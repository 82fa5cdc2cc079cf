#include "nfsem/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace nfsem {

Ray Camera::pixel_ray(double ix, double iy) const {
  Ray ray;
  const double u = ix + 0.5 - 0.5 * intr.width;
  const double v = 0.5 * intr.height - iy - 0.5;  // row 0 at +y
  if (intr.type == Intrinsics::Type::kOrtho) {
    ray.origin = pose.to_world({u * intr.pixel_size, v * intr.pixel_size, 0.0});
    ray.dir = pose.dir_to_world({0.0, 0.0, -1.0});
  } else {
    ray.origin = pose.trans;
    ray.dir = pose.dir_to_world(normalized({u / intr.focal_px, v / intr.focal_px, -1.0}));
  }
  return ray;
}

bool valid_rig_size(int n) { return n >= 1 && n <= 37 && (n - 1) % 4 == 0; }

std::vector<Camera> make_rig(const RigSpec& spec, int n_views) {
  if (!valid_rig_size(n_views))
    throw std::invalid_argument("rig subset size must be 1 + 4k with k <= 9, got " +
                                std::to_string(n_views));
  // Top view: camera axes aligned with the world, looking down -z.
  Pose top;
  top.rot = Mat3::identity();
  top.trans = spec.center + Vec3{0.0, 0.0, spec.camera_distance};

  std::vector<double> angles;
  const int rings = (n_views - 1) / 4;
  for (int j = 1; j <= rings; ++j) {
    const int idx = static_cast<int>(std::lround(9.0 * j / rings));
    angles.push_back(deg_to_rad(5.0 * idx));
  }

  std::vector<Camera> cams;
  cams.reserve(static_cast<std::size_t>(n_views));
  auto add = [&](const Mat3& tilt) {
    Camera cam;
    cam.intr = spec.intrinsics;
    cam.pose.rot = tilt * top.rot;
    cam.pose.trans = spec.center + tilt * (top.trans - spec.center);
    cams.push_back(cam);
  };
  add(Mat3::identity());
  for (double a : angles) {
    add(Mat3::rotation_x(a));
    add(Mat3::rotation_x(-a));
    add(Mat3::rotation_y(a));
    add(Mat3::rotation_y(-a));
  }
  return cams;
}

}  // namespace nfsem
