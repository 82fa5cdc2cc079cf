#include "nfsem/scenes.hpp"

#include <cmath>
#include <stdexcept>

namespace nfsem {

namespace {

double sphere_sdf(const SpherePrim& s, const Vec3& x) { return norm(x - s.center) - s.radius; }

double box_sdf(const BoxPrim& b, const Vec3& x) {
  const Vec3 q = abs(x - b.center) - b.half;
  const Vec3 q_pos = max(q, Vec3{0.0, 0.0, 0.0});
  const double outside = norm(q_pos);
  const double inside = std::fmin(std::fmax(q.x, std::fmax(q.y, q.z)), 0.0);
  return outside + inside;
}

double paraboloid_sdf(const ParaboloidPrim& p, const Vec3& x) {
  // Solid below the cap z = apex.z - height * (rho/radius)^2. The vertical
  // distance scaled by the slope bound at the query radius is a valid
  // sphere-tracing lower bound with an exact zero set and exact surface
  // normals.
  const double dx = x.x - p.apex.x;
  const double dy = x.y - p.apex.y;
  const double rho = std::sqrt(dx * dx + dy * dy);
  const double cap = p.apex.z - p.height * rho * rho / (p.radius * p.radius);
  const double slope = 2.0 * p.height * std::fmax(rho, p.radius) / (p.radius * p.radius);
  return (x.z - cap) / std::sqrt(1.0 + slope * slope);
}

}  // namespace

double Scene::sdf(const Vec3& x) const {
  double s = 1e30;
  for (const auto& sp : spheres) s = std::fmin(s, sphere_sdf(sp, x));
  for (const auto& bx : boxes) s = std::fmin(s, box_sdf(bx, x));
  for (const auto& pb : paraboloids) s = std::fmin(s, paraboloid_sdf(pb, x));
  if (substrate_height >= 0.0) s = std::fmin(s, x.z - substrate_height);
  return s;
}

Vec3 Scene::normal(const Vec3& x) const {
  constexpr double h = 1e-5;
  const double dx = sdf({x.x + h, x.y, x.z}) - sdf({x.x - h, x.y, x.z});
  const double dy = sdf({x.x, x.y + h, x.z}) - sdf({x.x, x.y - h, x.z});
  const double dz = sdf({x.x, x.y, x.z + h}) - sdf({x.x, x.y, x.z - h});
  return normalized({dx, dy, dz});
}

ForwardModelParams phi_preset(const std::string& preset) {
  ForwardModelParams phi;
  if (preset == "varied") {
    phi.c = {31.0, 29.0, 30.0, 32.0};
    phi.d = {24.0, 26.0, 25.0, 23.0};
    phi.e = {40.0, 42.0, 38.0, 41.0};
    phi.p = {0.3, -0.1, 0.4, -0.05};
    phi.emission = EmissionModel::kPolynomial;
  } else if (preset == "ps-exact") {
    phi.c = {60.0, 60.0, 60.0, 60.0};
    phi.d = {48.0, 48.0, 48.0, 48.0};
    phi.e = {0.0, 0.0, 0.0, 0.0};
    phi.p = {0.0, 0.0, 0.0, 0.0};
    phi.emission = EmissionModel::kSecant;
  } else if (preset == "uniform") {
    phi.c = {30.0, 30.0, 30.0, 30.0};
    phi.d = {25.0, 25.0, 25.0, 25.0};
    phi.e = {40.0, 40.0, 40.0, 40.0};
    phi.p = {0.3, -0.1, 0.4, -0.05};
    phi.emission = EmissionModel::kPolynomial;
  } else {
    throw std::invalid_argument("unknown phi preset: " + preset);
  }
  return phi;
}

std::vector<std::string> scene_names() {
  return {"plane", "sphere", "paraboloid", "pyramid", "occluder", "composite"};
}

Scene make_scene(const std::string& name) {
  Scene scene;
  scene.name = name;
  scene.phi_gt = phi_preset("varied");
  if (name == "plane") {
    scene.substrate_height = 0.4;
  } else if (name == "sphere") {
    scene.spheres.push_back({{0.5, 0.5, 0.5}, 0.3});
  } else if (name == "paraboloid") {
    scene.paraboloids.push_back({{0.5, 0.5, 0.35}, 0.2, 0.35});
    scene.substrate_height = 0.15;
  } else if (name == "pyramid") {
    scene.substrate_height = 0.15;
    scene.boxes.push_back({{0.5, 0.5, 0.235}, {0.28, 0.28, 0.085}});
    scene.boxes.push_back({{0.5, 0.5, 0.39}, {0.18, 0.18, 0.07}});
    scene.boxes.push_back({{0.5, 0.5, 0.52}, {0.09, 0.09, 0.06}});
  } else if (name == "occluder") {
    scene.substrate_height = 0.15;
    scene.boxes.push_back({{0.5, 0.5, 0.375}, {0.025, 0.28, 0.225}});
    scene.spheres.push_back({{0.72, 0.32, 0.21}, 0.06});
  } else if (name == "composite") {
    scene.substrate_height = 0.15;
    scene.spheres.push_back({{0.35, 0.6, 0.3}, 0.12});
    scene.boxes.push_back({{0.65, 0.35, 0.24}, {0.1, 0.1, 0.09}});
    scene.paraboloids.push_back({{0.62, 0.68, 0.33}, 0.14, 0.16});
  } else {
    throw std::invalid_argument("unknown scene: " + name);
  }
  return scene;
}

TraceResult sphere_trace(const Scene& scene, const Vec3& origin, const Vec3& dir, double t_near,
                         double t_far) {
  TraceResult res;
  double t = t_near;
  double prev_t = t_near;
  for (int iter = 0; iter < 512 && t <= t_far; ++iter) {
    const double s = scene.sdf(origin + dir * t);
    if (s < 1e-6) {
      // Bisect between the last safe point and here for a clean hit.
      double lo = prev_t, hi = t + std::fmax(s, 0.0);
      for (int b = 0; b < 40; ++b) {
        const double mid = 0.5 * (lo + hi);
        (scene.sdf(origin + dir * mid) > 0.0 ? lo : hi) = mid;
      }
      res.hit = true;
      res.t = 0.5 * (lo + hi);
      return res;
    }
    prev_t = t;
    t += s;
  }
  return res;
}

}  // namespace nfsem
