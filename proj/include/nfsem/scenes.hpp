#pragma once

#include <string>
#include <vector>

#include "nfsem/forward_model.hpp"
#include "nfsem/geometry.hpp"

namespace nfsem {

// Analytic solids inside the unit cube. Sphere and box distances are exact;
// the paraboloid cap uses a Lipschitz-scaled height-field distance whose
// zero set and surface normals are exact (a valid sphere-tracing bound).
struct SpherePrim {
  Vec3 center;
  double radius;
};

struct BoxPrim {
  Vec3 center;
  Vec3 half;
};

struct ParaboloidPrim {
  Vec3 apex;      // top of the dome
  double height;  // apex height above the rim plane
  double radius;  // rim radius
};

struct Scene {
  std::string name;
  std::vector<SpherePrim> spheres;
  std::vector<BoxPrim> boxes;
  std::vector<ParaboloidPrim> paraboloids;
  double substrate_height = -1.0;  // slab z <= h when >= 0
  ForwardModelParams phi_gt;
  double scene_scale = 20.0;  // micrometers per scene unit

  double sdf(const Vec3& x) const;
  Vec3 normal(const Vec3& x) const;  // central differences of the sdf
};

// Catalog: plane, sphere, paraboloid, pyramid, occluder, composite.
Scene make_scene(const std::string& name);
std::vector<std::string> scene_names();

// Ground-truth detector parameters. "varied" is the quadrant-varied default
// exercised by the 4Q-Var learning path; "ps-exact" matches the classical
// photometric-stereo assumptions (shared c and d, zero offset, secant R);
// "uniform" shares all parameters with a polynomial R.
ForwardModelParams phi_preset(const std::string& preset);

struct TraceResult {
  bool hit = false;
  double t = 0.0;
};

// Sphere tracing against the scene SDF; requires only the lower-bound
// property of the distance estimate.
TraceResult sphere_trace(const Scene& scene, const Vec3& origin, const Vec3& dir, double t_near,
                         double t_far);

}  // namespace nfsem
