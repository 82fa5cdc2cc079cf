#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "nfsem/field.hpp"
#include "nfsem/render.hpp"
#include "nfsem/rng.hpp"

using namespace nfsem;

namespace {

// Overwrites the MLP so the network computes an affine function of the raw
// coordinates: s(x) = dot(n, x - 0.5) + offset. Two hidden units implement
// the identity through relu(t) - relu(-t).
void make_affine_field(const SdfField& field, std::vector<double>& params, const Vec3& n,
                       double offset) {
  const FieldLayout& lay = field.layout();
  const FieldConfig& cfg = field.config();
  const int in = cfg.mlp_input_dim();
  for (std::size_t i = 0; i < lay.hash_count; ++i) params[lay.hash_offset + i] = 0.0;
  for (std::size_t i = lay.w1_offset; i < lay.count; ++i) params[i] = 0.0;
  double* w1 = params.data() + lay.w1_offset;
  w1[0 * in + (in - 3)] = n.x;
  w1[0 * in + (in - 2)] = n.y;
  w1[0 * in + (in - 1)] = n.z;
  w1[1 * in + (in - 3)] = -n.x;
  w1[1 * in + (in - 2)] = -n.y;
  w1[1 * in + (in - 1)] = -n.z;
  params[lay.w2_offset + 0] = 1.0;
  params[lay.w2_offset + 1] = -1.0;
  params[lay.b2_offset] = offset;
  params[lay.sharpness_offset] = std::log(500.0);
}

}  // namespace

TEST_CASE("plane crossing is localized within two sample bins") {
  SdfField field;
  std::vector<double> params(field.parameter_count(), 0.0);
  // s = 0.7 - z: positive before the surface, negative past it, so a +z ray
  // from 0 crosses front-facing at t* = 0.7.
  make_affine_field(field, params, {0.0, 0.0, -1.0}, 0.2);
  Ray ray;
  ray.origin = {0.5, 0.5, 0.0};
  ray.dir = {0.0, 0.0, 1.0};
  ray.t_near = 0.0;
  ray.t_far = 1.0;
  RenderOptions opt;
  opt.n_samples = 1024;
  const RenderResult res = render_ray(field, params, ray, opt);
  CHECK(res.hit);
  CHECK(std::fabs(res.depth - 0.7) < 2.0 * (ray.t_far - ray.t_near) / 1024.0);
  CHECK(res.normal.z == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("all-positive sdf along the ray yields no hit") {
  SdfField field;
  std::vector<double> params(field.parameter_count(), 0.0);
  make_affine_field(field, params, {0.0, 0.0, 1.0}, 0.8);  // s >= 0.3 everywhere
  Ray ray;
  ray.origin = {0.5, 0.5, 0.0};
  ray.dir = {0.0, 0.0, 1.0};
  ray.t_near = 0.0;
  ray.t_far = 1.0;
  RenderOptions opt;
  opt.n_samples = 256;
  const RenderResult res = render_ray(field, params, ray, opt);
  CHECK(!res.hit);
  CHECK(res.hit_weight < 0.01);
}

TEST_CASE("weights are non-negative and sum to at most one") {
  SdfField field;
  std::vector<double> params(field.parameter_count());
  Rng rng(8);
  field.init_parameters(params, rng);
  RenderOptions opt;
  opt.n_samples = 128;
  for (int trial = 0; trial < 20; ++trial) {
    Ray ray;
    ray.origin = {rng.uniform(), rng.uniform(), 1.5};
    ray.dir = normalized({rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), -1.0});
    ray.t_near = 0.2;
    ray.t_far = 2.0;
    const RenderResult res = render_ray(field, params, ray, opt);
    CHECK(res.hit_weight >= 0.0);
    CHECK(res.hit_weight <= 1.0 + 1e-6);
  }
}

TEST_CASE("sphere-like initial field renders radial normals") {
  SdfField field;
  std::vector<double> params(field.parameter_count());
  Rng rng(21);
  field.init_parameters(params, rng);
  // The geometric initialization is a sphere of radius 0.5 around the cube
  // center; a straight-down ray should hit near z = 0.5 + 0.5 with an
  // upward normal.
  Ray ray;
  ray.origin = {0.5, 0.5, 1.6};
  ray.dir = {0.0, 0.0, -1.0};
  ray.t_near = 0.0;
  ray.t_far = 1.6;
  RenderOptions opt;
  opt.n_samples = 512;
  const RenderResult res = render_ray(field, params, ray, opt);
  CHECK(res.hit);
  CHECK(std::fabs((1.6 - res.depth) - 1.0) < 0.15);
  CHECK(res.normal.z > 0.9);
  CHECK(std::fabs(norm(res.normal) - 1.0) < 1e-9);
}

TEST_CASE("depth estimate converges monotonically with the sample count") {
  SdfField field;
  std::vector<double> params(field.parameter_count(), 0.0);
  make_affine_field(field, params, {0.0, 0.0, -1.0}, 0.2);  // crossing at 0.7
  Ray ray;
  ray.origin = {0.5, 0.5, 0.0};
  ray.dir = {0.0, 0.0, 1.0};
  ray.t_near = 0.0;
  ray.t_far = 1.0;
  double prev_err = 1e9;
  for (int n : {128, 512, 2048}) {
    RenderOptions opt;
    opt.n_samples = n;
    const RenderResult res = render_ray(field, params, ray, opt);
    const double err = std::fabs(res.depth - 0.7);
    CHECK(err <= prev_err + 1e-12);
    prev_err = err;
  }
}

TEST_CASE("tape renderer agrees with the value renderer bit-for-bit") {
  SdfField field;
  std::vector<double> params(field.parameter_count());
  Rng rng(77);
  field.init_parameters(params, rng);
  RenderOptions opt;
  opt.n_samples = 64;
  ad::Tape tape(params);
  for (int trial = 0; trial < 10; ++trial) {
    Ray ray;
    ray.origin = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), 1.5};
    ray.dir = normalized({rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), -1.0});
    ray.t_near = 0.1;
    ray.t_far = 1.9;
    std::vector<double> jitter(static_cast<std::size_t>(opt.n_samples));
    for (auto& u : jitter) u = rng.uniform();

    const RenderResult val = render_ray(field, params, ray, opt, jitter.data());
    tape.reset();
    const FieldTapeLeaves leaves = field.prepare_tape(tape);
    const RayTapeNodes nodes = emit_render_ray(tape, field, leaves, ray, opt, jitter.data());
    CHECK(nodes.hit_weight_value == val.hit_weight);
    CHECK(nodes.hit == val.hit);
    if (val.hit) {
      CHECK(tape.value(nodes.depth) == val.depth);
      CHECK(tape.value(nodes.normal[0]) == val.normal.x);
      CHECK(tape.value(nodes.normal[1]) == val.normal.y);
      CHECK(tape.value(nodes.normal[2]) == val.normal.z);
    }
  }
}

TEST_CASE("rendered outputs are differentiable w.r.t. parameters") {
  FieldConfig cfg;
  cfg.levels = 4;
  cfg.table_log2 = 10;
  cfg.hidden = 16;
  SdfField field(cfg);
  std::vector<double> params(field.parameter_count());
  Rng rng(101);
  field.init_parameters(params, rng);

  Ray ray;
  ray.origin = {0.5, 0.45, 1.4};
  ray.dir = normalized({0.05, 0.02, -1.0});
  ray.t_near = 0.2;
  ray.t_far = 1.8;
  RenderOptions opt;
  opt.n_samples = 32;
  std::vector<double> jitter(32);
  for (auto& u : jitter) u = rng.uniform();

  auto objective = [&](std::span<const double> p) {
    const RenderResult r = render_ray(field, p, ray, opt, jitter.data());
    return r.depth + 0.3 * r.normal.x + 0.1 * r.hit_weight;
  };

  ad::Tape tape(params);
  const FieldTapeLeaves leaves = field.prepare_tape(tape);
  const RayTapeNodes nodes = emit_render_ray(tape, field, leaves, ray, opt, jitter.data());
  REQUIRE(nodes.hit);
  const ad::NodeId loss = tape.add(
      tape.add(nodes.depth, tape.mulc(nodes.normal[0], 0.3)), tape.mulc(nodes.hit_weight, 0.1));
  tape.backward(loss);

  const double h = 1e-4;
  int checked = 0;
  for (const auto& leaf : tape.leaves()) {
    if (checked >= 80) break;
    const double analytic = tape.adjoint(leaf.node);
    if (std::fabs(analytic) < 1e-7) continue;  // skip inactive table entries
    std::vector<double> pp = params;
    pp[leaf.param_index] += h;
    const double fp = objective(pp);
    pp[leaf.param_index] -= 2 * h;
    const double fm = objective(pp);
    const double fd = (fp - fm) / (2.0 * h);
    const double denom = std::fmax(std::fmax(std::fabs(fd), std::fabs(analytic)), 1e-4);
    CHECK(std::fabs(analytic - fd) / denom < 1e-3);
    ++checked;
  }
  CHECK(checked >= 40);
}
