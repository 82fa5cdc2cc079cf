#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "nfsem/forward_model.hpp"
#include "nfsem/photometric.hpp"
#include "nfsem/rng.hpp"
#include "nfsem/scenes.hpp"

using namespace nfsem;

namespace {

FloatMap constant_map(int w, int h, float v) {
  FloatMap m(w, h);
  for (std::size_t i = 0; i < m.pixel_count(); ++i) m[i] = v;
  return m;
}

Image<std::uint8_t> full_mask(int w, int h) { return Image<std::uint8_t>(w, h, 1, 1); }

}  // namespace

TEST_CASE("symmetric illumination gives zero gradient") {
  const FloatMap b = constant_map(8, 8, 50.0f);
  const PsGradients g = ps_gradients(b, b, b, b, 1.0, 0.0);
  for (std::size_t i = 0; i < g.gx.pixel_count(); ++i) {
    CHECK(g.gx[i] == 0.0f);
    CHECK(g.gy[i] == 0.0f);
    CHECK(g.valid[i] == 1);
  }
}

TEST_CASE("ratio arithmetic: bA=3, bB=1, d/c=1 gives raw 0.5") {
  const FloatMap ba = constant_map(2, 2, 3.0f);
  const FloatMap bb = constant_map(2, 2, 1.0f);
  const FloatMap bc = constant_map(2, 2, 2.0f);
  const FloatMap bd = constant_map(2, 2, 2.0f);
  const PsGradients g = ps_gradients(ba, bb, bc, bd, 1.0, 0.0);
  CHECK(g.gx[0] == doctest::Approx(0.5));
  CHECK(g.gy[0] == doctest::Approx(0.0));
}

TEST_CASE("zero denominator marks the pixel invalid and infill patches it") {
  FloatMap ba = constant_map(3, 1, 3.0f), bb = constant_map(3, 1, 1.0f);
  FloatMap bc = constant_map(3, 1, 2.0f), bd = constant_map(3, 1, 2.0f);
  ba[1] = 0.0f;
  bb[1] = 0.0f;
  PsGradients g = ps_gradients(ba, bb, bc, bd, 1.0, 0.0);
  CHECK(g.valid[0] == 1);
  CHECK(g.valid[1] == 0);
  infill_nearest(g.gx, g.valid);
  CHECK(g.gx[1] == g.gx[0]);  // nearest valid neighbor
}

TEST_CASE("detector rotation maps detector-axis slopes into image axes") {
  // A surface sloping along the image x-axis, viewed through a detector
  // rotated by 30 degrees: the quadrant ratios live in the detector frame
  // and must rotate back to pure image-x slope.
  const double rot = deg_to_rad(30.0);
  ForwardModelParams phi = phi_preset("ps-exact");
  phi.detector_rotation = rot;
  const double slope = 0.35;  // dz/dx in image coordinates
  const Vec3 n = normalized({slope, 0.0, 1.0});
  FloatMap maps[4];
  for (int q = 0; q < 4; ++q) maps[q] = constant_map(4, 4, static_cast<float>(bse_forward(phi, n, q)));
  const PsGradients g =
      ps_gradients(maps[0], maps[1], maps[2], maps[3], phi.d[0] / phi.c[0], rot);
  CHECK(g.gx[0] == doctest::Approx(slope).epsilon(1e-4));
  CHECK(g.gy[0] == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("zero gradients integrate to the zero map") {
  const FloatMap gx = constant_map(16, 12, 0.0f), gy = constant_map(16, 12, 0.0f);
  const IntegrationResult r = integrate_gradients(gx, gy, full_mask(16, 12));
  for (std::size_t i = 0; i < r.height.pixel_count(); ++i) CHECK(r.height[i] == 0.0f);
}

TEST_CASE("a linear gradient field integrates back to the plane exactly") {
  const int w = 24, h = 18;
  const FloatMap gx = constant_map(w, h, 0.3f), gy = constant_map(w, h, 0.1f);
  const IntegrationResult r = integrate_gradients(gx, gy, full_mask(w, h));
  // Expected plane 0.3 x + 0.1 y up to an additive constant.
  double offset = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) offset += r.height.at(x, y) - (0.3 * x + 0.1 * y);
  offset /= w * h;
  double worst = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      worst = std::fmax(worst,
                        std::fabs(r.height.at(x, y) - (0.3 * x + 0.1 * y) - offset));
  CHECK(worst < 1e-6);
}

TEST_CASE("curl-free paraboloid gradients integrate within 1e-4 of the range") {
  const int w = 48, h = 36;
  FloatMap gx(w, h), gy(w, h);
  auto zfun = [&](double x, double y) {
    const double cx = x - 0.5 * w, cy = y - 0.5 * h;
    return -0.01 * (cx * cx + cy * cy);
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      // Forward-difference-consistent gradients make the system exact.
      gx.at(x, y) = static_cast<float>(zfun(x + 1, y) - zfun(x, y));
      gy.at(x, y) = static_cast<float>(zfun(x, y + 1) - zfun(x, y));
    }
  const IntegrationResult r = integrate_gradients(gx, gy, full_mask(w, h));
  double zmin = 1e30, zmax = -1e30, mean_gt = 0.0, mean_rec = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      zmin = std::fmin(zmin, zfun(x, y));
      zmax = std::fmax(zmax, zfun(x, y));
      mean_gt += zfun(x, y);
      mean_rec += r.height.at(x, y);
    }
  mean_gt /= w * h;
  mean_rec /= w * h;
  double rmse = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d = (r.height.at(x, y) - mean_rec) - (zfun(x, y) - mean_gt);
      rmse += d * d;
    }
  rmse = std::sqrt(rmse / (w * h));
  CHECK(rmse < 1e-4 * (zmax - zmin));
}

TEST_CASE("integration is linear in the gradient field") {
  Rng rng(3);
  const int w = 12, h = 10;
  FloatMap gx1(w, h), gy1(w, h), gx2(w, h), gy2(w, h), gxs(w, h), gys(w, h);
  for (std::size_t i = 0; i < gx1.pixel_count(); ++i) {
    gx1[i] = static_cast<float>(rng.uniform(-1, 1));
    gy1[i] = static_cast<float>(rng.uniform(-1, 1));
    gx2[i] = static_cast<float>(rng.uniform(-1, 1));
    gy2[i] = static_cast<float>(rng.uniform(-1, 1));
    gxs[i] = gx1[i] + gx2[i];
    gys[i] = gy1[i] + gy2[i];
  }
  const auto mask = full_mask(w, h);
  const IntegrationResult r1 = integrate_gradients(gx1, gy1, mask, 1e-12);
  const IntegrationResult r2 = integrate_gradients(gx2, gy2, mask, 1e-12);
  const IntegrationResult rs = integrate_gradients(gxs, gys, mask, 1e-12);
  for (std::size_t i = 0; i < rs.height.pixel_count(); ++i)
    CHECK(rs.height[i] == doctest::Approx(r1.height[i] + r2.height[i]).epsilon(1e-6));
}

TEST_CASE("empty mask is rejected") {
  const FloatMap gx = constant_map(4, 4, 0.0f), gy = constant_map(4, 4, 0.0f);
  Image<std::uint8_t> empty(4, 4, 1, 0);
  CHECK_THROWS_AS(integrate_gradients(gx, gy, empty), std::invalid_argument);
}

TEST_CASE("flat scene reconstructs to a flat (zero-range) surface") {
  const int w = 16, h = 12;
  ForwardModelParams phi = phi_preset("ps-exact");
  const Vec3 up{0.0, 0.0, 1.0};
  FloatMap maps[4];
  for (int q = 0; q < 4; ++q)
    maps[q] = constant_map(w, h, static_cast<float>(bse_forward(phi, up, q)));
  const FloatMap coarse = constant_map(w, h, 1.25f);
  const PsReconstruction rec =
      ps_reconstruct(maps[0], maps[1], maps[2], maps[3], coarse, full_mask(w, h),
                     phi.d[0] / phi.c[0], 0.0, 0.01, false);
  for (std::size_t i = 0; i < rec.depth.pixel_count(); ++i)
    CHECK(rec.depth[i] == doctest::Approx(1.25).epsilon(1e-6));
}
