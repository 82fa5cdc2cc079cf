#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nfsem/photometric.hpp"
#include "nfsem/simulator.hpp"

using namespace nfsem;

namespace {

SimulatorOptions small_options() {
  SimulatorOptions opt;
  opt.n_views = 1;
  opt.width = 64;
  opt.height = 48;
  opt.shadows = false;
  opt.noise_sigma = 0.0;
  return opt;
}

}  // namespace

TEST_CASE("top view of a plane yields a constant depth map") {
  const Scene scene = make_scene("plane");
  const SimulatedDataset ds = simulate_dataset(scene, small_options());
  const SimulatedView& v = ds.views[0];
  float first = 0.0f;
  bool have_first = false;
  for (std::size_t i = 0; i < v.gt_depth.pixel_count(); ++i) {
    if (!v.foreground[i]) continue;
    if (!have_first) {
      first = v.gt_depth[i];
      have_first = true;
    }
    CHECK(v.gt_depth[i] == doctest::Approx(first).epsilon(1e-9));
  }
  CHECK(have_first);
}

TEST_CASE("sphere silhouette radius matches the analytic projection within one pixel") {
  const Scene scene = make_scene("sphere");
  SimulatorOptions opt = small_options();
  opt.width = 128;
  opt.height = 96;
  const SimulatedDataset ds = simulate_dataset(scene, opt);
  const SimulatedView& v = ds.views[0];  // top view
  // Count foreground pixels: area = pi r_px^2.
  std::int64_t count = 0;
  for (std::size_t i = 0; i < v.foreground.pixel_count(); ++i) count += v.foreground[i];
  const double px = v.camera.intr.pixel_size;
  const double r_measured = std::sqrt(static_cast<double>(count) / kPi);
  const double r_expected = 0.3 / px;
  CHECK(std::fabs(r_measured - r_expected) < 1.0);
}

TEST_CASE("finite-difference normals from the depth map agree with analytic normals") {
  const Scene scene = make_scene("paraboloid");
  const SimulatedDataset ds = simulate_dataset(scene, small_options());
  const SimulatedView& v = ds.views[0];
  const int w = v.gt_depth.width(), h = v.gt_depth.height();
  const double px = v.camera.intr.pixel_size;
  double worst = 0.0;
  int tested = 0;
  for (int y = 2; y < h - 2; ++y)
    for (int x = 2; x < w - 2; ++x) {
      bool interior = true;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) interior &= v.foreground.at(x + dx, y + dy) != 0;
      if (!interior) continue;
      // Away from silhouettes and the dome rim (slope discontinuity).
      const Vec3 n_gt{v.gt_normal.at(x, y, 0), v.gt_normal.at(x, y, 1), v.gt_normal.at(x, y, 2)};
      if (n_gt.z < 0.75) continue;
      const double zx = (v.gt_depth.at(x + 1, y) - v.gt_depth.at(x - 1, y)) / (2 * px);
      const double zy = (v.gt_depth.at(x, y + 1) - v.gt_depth.at(x, y - 1)) / (2 * px);
      const Vec3 n_fd = normalized({zx, -zy, 1.0});
      const double angle = rad_to_deg(std::acos(std::fmin(1.0, dot(n_fd, n_gt))));
      if (angle > worst) worst = angle;
      ++tested;
    }
  CHECK(tested > 200);
  CHECK(worst < 3.0);
}

TEST_CASE("convex scene has (near) zero shadow on gently tilted surface") {
  const Scene scene = make_scene("sphere");
  SimulatorOptions opt = small_options();
  opt.shadows = true;
  opt.light_samples = 32;
  const SimulatedDataset ds = simulate_dataset(scene, opt);
  const SimulatedView& v = ds.views[0];
  for (std::size_t i = 0; i < v.gt_depth.pixel_count(); ++i) {
    if (!v.foreground[i]) continue;
    if (v.gt_normal[i * 3 + 2] < std::cos(deg_to_rad(45.0))) continue;
    for (int q = 0; q < 4; ++q) CHECK(v.shadow[q][i] == 0.0f);
  }
}

TEST_CASE("occluder shadows fall on opposite sides for opposite quadrants") {
  const Scene scene = make_scene("occluder");
  SimulatorOptions opt = small_options();
  opt.shadows = true;
  opt.light_samples = 32;
  const SimulatedDataset ds = simulate_dataset(scene, opt);
  const SimulatedView& v = ds.views[0];
  const int w = v.gt_depth.width(), h = v.gt_depth.height();
  // Quadrant A sits toward +x (image right): it is occluded for substrate
  // points west of the wall, so its shadow mass is on the left half.
  double left_a = 0.0, right_a = 0.0, left_b = 0.0, right_b = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      (x < w / 2 ? left_a : right_a) += v.shadow[0].at(x, y);
      (x < w / 2 ? left_b : right_b) += v.shadow[1].at(x, y);
    }
  CHECK(left_a > 5.0 * right_a);
  CHECK(right_b > 5.0 * left_b);
}

TEST_CASE("doubling the light samples changes shadow maps by < 2 intensity units RMS") {
  const Scene scene = make_scene("occluder");
  SimulatorOptions opt = small_options();
  opt.shadows = true;
  opt.light_samples = 64;
  const SimulatedDataset a = simulate_dataset(scene, opt);
  opt.light_samples = 128;
  const SimulatedDataset b = simulate_dataset(scene, opt);
  double sq = 0.0;
  std::int64_t n = 0;
  for (int q = 0; q < 4; ++q)
    for (std::size_t i = 0; i < a.views[0].shadow[q].pixel_count(); ++i) {
      const double d = a.views[0].shadow[q][i] - b.views[0].shadow[q][i];
      sq += d * d;
      ++n;
    }
  CHECK(std::sqrt(sq / n) < 2.0);
}

TEST_CASE("noise-free shadow-free images equal the forward model exactly") {
  const Scene scene = make_scene("paraboloid");
  const SimulatedDataset ds = simulate_dataset(scene, small_options());
  const SimulatedView& v = ds.views[0];
  for (std::size_t i = 0; i < v.gt_depth.pixel_count(); ++i) {
    if (!v.foreground[i]) continue;
    const Vec3 n{v.gt_normal[i * 3], v.gt_normal[i * 3 + 1], v.gt_normal[i * 3 + 2]};
    if (n.z <= 1e-6) continue;
    for (int q = 0; q < 4; ++q) {
      const double f = bse_forward(ds.scene.phi_gt, n, q);
      CHECK(v.bse[q][i] ==
            doctest::Approx(std::fmin(std::fmax(f, 0.0), 255.0)).epsilon(1e-6));
    }
  }
}

TEST_CASE("noise level is recovered empirically on a flat region") {
  const Scene scene = make_scene("plane");
  SimulatorOptions opt = small_options();
  opt.noise_sigma = 0.9142;
  const SimulatedDataset ds = simulate_dataset(scene, opt);
  const SimulatedView& v = ds.views[0];
  // Flat plane: the shadow-free signal is constant, so the sample standard
  // deviation of the image equals the injected noise.
  double mean = 0.0;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < v.bse[0].pixel_count(); ++i)
    if (v.foreground[i]) {
      mean += v.bse[0][i];
      ++n;
    }
  mean /= n;
  double var = 0.0;
  for (std::size_t i = 0; i < v.bse[0].pixel_count(); ++i)
    if (v.foreground[i]) var += (v.bse[0][i] - mean) * (v.bse[0][i] - mean);
  var /= (n - 1);
  CHECK(std::fabs(std::sqrt(var) - 0.9142) < 0.1);
}

TEST_CASE("flat region intensity is c + e per quadrant") {
  const Scene scene = make_scene("plane");
  const SimulatedDataset ds = simulate_dataset(scene, small_options());
  const SimulatedView& v = ds.views[0];
  std::size_t i = 0;
  while (!v.foreground[i]) ++i;
  for (int q = 0; q < 4; ++q)
    CHECK(v.bse[q][i] ==
          doctest::Approx(ds.scene.phi_gt.c[q] + ds.scene.phi_gt.e[q]).epsilon(1e-6));
}

TEST_CASE("degrade_depth: zero blur and zero noise reproduce the input") {
  const Scene scene = make_scene("pyramid");
  SimulatorOptions opt = small_options();
  opt.blur_radius = 0.0;
  opt.noise_amp = 0.0;
  const SimulatedDataset ds = simulate_dataset(scene, opt);
  const SimulatedView& v = ds.views[0];
  for (std::size_t i = 0; i < v.gt_depth.pixel_count(); ++i)
    if (v.foreground[i]) CHECK(v.coarse_depth[i] == doctest::Approx(v.gt_depth[i]).epsilon(1e-7));
}

TEST_CASE("default degradation makes the coarse depth strictly worse on steps") {
  const Scene scene = make_scene("pyramid");
  const SimulatedDataset ds = simulate_dataset(scene, small_options());
  const SimulatedView& v = ds.views[0];
  double mae = 0.0;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < v.gt_depth.pixel_count(); ++i)
    if (v.foreground[i]) {
      mae += std::fabs(v.coarse_depth[i] - v.gt_depth[i]);
      ++n;
    }
  CHECK(mae / n > 0.0);
}

TEST_CASE("confidence is 0.2 on every foreground pixel") {
  const Scene scene = make_scene("sphere");
  const SimulatedDataset ds = simulate_dataset(scene, small_options());
  const SimulatedView& v = ds.views[0];
  for (std::size_t i = 0; i < v.confidence.pixel_count(); ++i) {
    if (v.foreground[i])
      CHECK(v.confidence[i] == doctest::Approx(0.2));
    else
      CHECK(v.confidence[i] == 0.0f);
  }
}

TEST_CASE("end-to-end: shadow-free paraboloid survives the ps pipeline") {
  const Scene scene = make_scene("paraboloid");
  SimulatorOptions opt = small_options();
  opt.phi_preset = "ps-exact";
  const SimulatedDataset ds = simulate_dataset(scene, opt);
  const SimulatedView& v = ds.views[0];
  const ForwardModelParams& phi = ds.scene.phi_gt;
  FloatMap maps[4];
  for (int q = 0; q < 4; ++q) maps[q] = v.bse[q];
  const PsReconstruction rec = ps_reconstruct(
      maps[0], maps[1], maps[2], maps[3], v.gt_depth, v.foreground, phi.d[0] / phi.c[0],
      phi.detector_rotation, v.camera.intr.pixel_size, false);
  double zmin = 1e30, zmax = -1e30, rmse = 0.0;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < v.gt_depth.pixel_count(); ++i)
    if (v.foreground[i]) {
      zmin = std::fmin(zmin, v.gt_depth[i]);
      zmax = std::fmax(zmax, v.gt_depth[i]);
      const double d = rec.depth[i] - v.gt_depth[i];
      rmse += d * d;
      ++n;
    }
  rmse = std::sqrt(rmse / n);
  CHECK(rmse < 1e-3 * (zmax - zmin));
}
