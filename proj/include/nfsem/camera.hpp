#pragma once

#include <string>
#include <vector>

#include "nfsem/geometry.hpp"

namespace nfsem {

// Camera frame: x right, y up, looking along -z. Depth is the ray parameter
// of the (unit-direction) pixel ray, i.e. camera-plane distance for the
// orthographic model. Pixel (0,0) is the top-left corner; rays go through
// pixel centers.
struct Intrinsics {
  enum class Type { kOrtho, kPinhole };
  Type type = Type::kOrtho;
  int width = 128;
  int height = 96;
  double pixel_size = 0.0167;  // ortho: scene units per pixel
  double focal_px = 160.0;     // pinhole: focal length in pixels

  std::string type_name() const { return type == Type::kOrtho ? "ortho" : "pinhole"; }
};

struct Camera {
  Intrinsics intr;
  Pose pose;  // camera-to-world

  // World-space ray through pixel center (ix, iy); t bounds are left at 0.
  Ray pixel_ray(double ix, double iy) const;
};

// The acquisition rig tilts the view about two orthogonal axes through the
// scene center, -45..45 degrees in 5-degree steps; the full rig has 37
// poses. Subsets of size 1+4k keep the top view plus k symmetric tilt rings
// on both axes.
struct RigSpec {
  Vec3 center{0.5, 0.5, 0.5};
  double camera_distance = 1.5;
  Intrinsics intrinsics;
};

std::vector<Camera> make_rig(const RigSpec& spec, int n_views);
bool valid_rig_size(int n_views);  // n in {1, 5, 9, ..., 37}

}  // namespace nfsem
