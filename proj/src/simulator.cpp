#include "nfsem/simulator.hpp"

#include <cmath>

#include "nfsem/parallel.hpp"
#include "nfsem/rng.hpp"

namespace nfsem {

void render_ground_truth(const Scene& scene, const Camera& cam, FloatMap& depth, FloatMap& normal,
                         Image<std::uint8_t>& foreground) {
  const int w = cam.intr.width, h = cam.intr.height;
  depth = FloatMap(w, h);
  normal = FloatMap(w, h, 3);
  foreground = Image<std::uint8_t>(w, h, 1, 0);
  const Vec3 lo{0.0, 0.0, 0.0}, hi{1.0, 1.0, 1.0};
  parallel_for(static_cast<std::int64_t>(w) * h, [&](std::int64_t i) {
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    Ray ray = cam.pixel_ray(x, y);
    double t0, t1;
    if (!intersect_box(ray.origin, ray.dir, lo, hi, t0, t1)) return;
    // Rays already inside the solid at the cube boundary (substrate side
    // walls) are not a surface seen from outside; treat as background.
    if (scene.sdf(ray.at(t0 + 1e-6)) < 0.0) return;
    const TraceResult hit = sphere_trace(scene, ray.origin, ray.dir, t0, t1);
    if (!hit.hit) return;
    const Vec3 p = ray.at(hit.t);
    const Vec3 n_cam = cam.pose.dir_to_camera(scene.normal(p));
    depth.at(x, y) = static_cast<float>(hit.t);
    normal.at(x, y, 0) = static_cast<float>(n_cam.x);
    normal.at(x, y, 1) = static_cast<float>(n_cam.y);
    normal.at(x, y, 2) = static_cast<float>(n_cam.z);
    foreground.at(x, y) = 1;
  });
}

namespace {
constexpr double kLightInner = 2.0;
constexpr double kLightOuter = 6.0;
constexpr double kLightHeight = 10.0;
}  // namespace

void render_shadows(const Scene& scene, const Camera& cam, const FloatMap& gt_depth,
                    const FloatMap& gt_normal, const Image<std::uint8_t>& foreground,
                    const ForwardModelParams& phi_gt, int light_samples, std::uint64_t seed,
                    std::array<FloatMap, 4>& psi) {
  const int w = cam.intr.width, h = cam.intr.height;
  for (auto& m : psi) m = FloatMap(w, h);
  // Stratified grid over the (radius^2, azimuth) rectangle.
  int grid = 1;
  while (grid * grid < light_samples) ++grid;
  const int n_samples = grid * grid;
  const Vec3 scene_center{0.5, 0.5, 0.5};

  parallel_for(static_cast<std::int64_t>(w) * h, [&](std::int64_t i) {
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    if (!foreground.at(x, y)) return;
    const Ray ray = cam.pixel_ray(x, y);
    const Vec3 p = ray.at(gt_depth.at(x, y));
    const Vec3 n_cam{gt_normal.at(x, y, 0), gt_normal.at(x, y, 1), gt_normal.at(x, y, 2)};
    const Vec3 n_world = cam.pose.dir_to_world(n_cam);
    const Vec3 start = p + n_world * 1e-4;
    // Light plane center in camera coordinates.
    const Vec3 center_cam = cam.pose.to_camera(scene_center);
    for (int q = 0; q < 4; ++q) {
      Rng rng(mix_seed(seed, (static_cast<std::uint64_t>(q) << 40) ^
                                 (static_cast<std::uint64_t>(y) << 20) ^
                                 static_cast<std::uint64_t>(x)));
      const double az = phi_gt.quadrant_azimuth(q);
      int occluded = 0;
      for (int s = 0; s < n_samples; ++s) {
        const int gu = s % grid, gv = s / grid;
        const double u = (gu + rng.uniform()) / grid;
        const double v = (gv + rng.uniform()) / grid;
        const double r2 = kLightInner * kLightInner +
                          u * (kLightOuter * kLightOuter - kLightInner * kLightInner);
        const double r = std::sqrt(r2);
        const double chi = az + (v - 0.5) * (kPi / 2.0);
        const Vec3 sample_cam = center_cam + Vec3{r * std::cos(chi), r * std::sin(chi),
                                                  kLightHeight};
        const Vec3 light = cam.pose.to_world(sample_cam);
        const Vec3 to_light = light - start;
        const double dist = norm(to_light);
        const Vec3 dir = to_light / dist;
        if (dot(dir, n_world) <= 0.0) {  // below the local horizon
          ++occluded;
          continue;
        }
        const TraceResult hit = sphere_trace(scene, start, dir, 1e-4, dist - 1e-4);
        if (hit.hit) ++occluded;
      }
      const double frac = static_cast<double>(occluded) / n_samples;
      if (frac > 0.0) {
        const double nz = std::fmax(static_cast<double>(n_cam.z), 1e-6);
        const Vec3 n_front{n_cam.x, n_cam.y, nz};
        const double f = bse_forward(phi_gt, normalized(n_front), q);
        psi[q].at(x, y) = static_cast<float>(frac * f);
      }
    }
  });
}

void synthesize_bse(const FloatMap& gt_normal, const Image<std::uint8_t>& foreground,
                    const std::array<FloatMap, 4>& psi, const ForwardModelParams& phi_gt,
                    double sigma, std::uint64_t seed, std::array<FloatMap, 4>& bse) {
  const int w = gt_normal.width(), h = gt_normal.height();
  for (int q = 0; q < 4; ++q) {
    bse[q] = FloatMap(w, h);
    Rng rng(mix_seed(seed, 0x1000 + static_cast<std::uint64_t>(q)));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double noise = sigma > 0.0 ? sigma * rng.gaussian() : 0.0;
        double value;
        if (foreground.at(x, y)) {
          const double nz = std::fmax(static_cast<double>(gt_normal.at(x, y, 2)), 1e-6);
          const Vec3 n = normalized({gt_normal.at(x, y, 0), gt_normal.at(x, y, 1), nz});
          value = bse_forward(phi_gt, n, q) - (psi[q].empty() ? 0.0 : psi[q].at(x, y)) + noise;
        } else {
          value = phi_gt.eq(q) + noise;
        }
        bse[q].at(x, y) = static_cast<float>(std::fmin(std::fmax(value, 0.0), 255.0));
      }
  }
}

void degrade_depth(const FloatMap& gt_depth, const Image<std::uint8_t>& foreground,
                   double blur_radius, double noise_amp, double confidence, std::uint64_t seed,
                   FloatMap& coarse, FloatMap& conf) {
  const int w = gt_depth.width(), h = gt_depth.height();
  coarse = FloatMap(w, h);
  conf = FloatMap(w, h);

  // Foreground-masked separable Gaussian blur.
  const double sigma = 0.5 * blur_radius;
  const int hw = blur_radius > 0.0 ? std::max(1, static_cast<int>(std::ceil(3.0 * sigma))) : 0;
  std::vector<double> kernel(2 * hw + 1, 1.0);
  if (hw > 0)
    for (int k = -hw; k <= hw; ++k) kernel[k + hw] = std::exp(-0.5 * k * k / (sigma * sigma));

  FloatMap tmp_v(w, h), tmp_w(w, h);
  parallel_for(static_cast<std::int64_t>(w) * h, [&](std::int64_t i) {
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    double num = 0.0, den = 0.0;
    for (int k = -hw; k <= hw; ++k) {
      const int xx = x + k;
      if (xx < 0 || xx >= w || !foreground.at(xx, y)) continue;
      num += kernel[k + hw] * gt_depth.at(xx, y);
      den += kernel[k + hw];
    }
    tmp_v.at(x, y) = static_cast<float>(num);
    tmp_w.at(x, y) = static_cast<float>(den);
  });
  parallel_for(static_cast<std::int64_t>(w) * h, [&](std::int64_t i) {
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    if (!foreground.at(x, y)) return;
    double num = 0.0, den = 0.0;
    for (int k = -hw; k <= hw; ++k) {
      const int yy = y + k;
      if (yy < 0 || yy >= h) continue;
      num += kernel[k + hw] * tmp_v.at(x, yy);
      den += kernel[k + hw] * tmp_w.at(x, yy);
    }
    coarse.at(x, y) = den > 0.0 ? static_cast<float>(num / den) : gt_depth.at(x, y);
    conf.at(x, y) = static_cast<float>(confidence);
  });

  // Smooth low-frequency perturbation: a coarse random grid, bilinearly
  // upsampled, scaled to a fraction of the foreground height range.
  if (noise_amp > 0.0) {
    double zmin = 1e30, zmax = -1e30;
    for (std::size_t i = 0; i < gt_depth.pixel_count(); ++i)
      if (foreground[i]) {
        zmin = std::fmin(zmin, gt_depth[i]);
        zmax = std::fmax(zmax, gt_depth[i]);
      }
    const double range = zmax > zmin ? zmax - zmin : 1.0;
    const int cell = 16;
    const int gw = w / cell + 2, gh = h / cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(gw) * gh);
    Rng rng(mix_seed(seed, 0xc0a45eull));
    for (auto& g : grid) g = rng.gaussian();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!foreground.at(x, y)) continue;
        const double gx = static_cast<double>(x) / cell, gy = static_cast<double>(y) / cell;
        const int ix = static_cast<int>(gx), iy = static_cast<int>(gy);
        const double fx = gx - ix, fy = gy - iy;
        const double v00 = grid[static_cast<std::size_t>(iy) * gw + ix];
        const double v10 = grid[static_cast<std::size_t>(iy) * gw + ix + 1];
        const double v01 = grid[static_cast<std::size_t>(iy + 1) * gw + ix];
        const double v11 = grid[static_cast<std::size_t>(iy + 1) * gw + ix + 1];
        const double n = (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
        coarse.at(x, y) += static_cast<float>(noise_amp * range * n);
      }
  }
}

SimulatedDataset simulate_dataset(const Scene& scene_in, const SimulatorOptions& options) {
  SimulatedDataset ds;
  ds.scene = scene_in;
  ds.options = options;
  if (!options.phi_preset.empty()) ds.scene.phi_gt = phi_preset(options.phi_preset);

  RigSpec rig;
  rig.camera_distance = options.camera_distance;
  rig.intrinsics.width = options.width;
  rig.intrinsics.height = options.height;
  rig.intrinsics.pixel_size =
      options.pixel_size > 0.0 ? options.pixel_size : 1.5 / options.height;
  const std::vector<Camera> cams = make_rig(rig, options.n_views);

  ds.views.resize(cams.size());
  for (std::size_t v = 0; v < cams.size(); ++v) {
    SimulatedView& view = ds.views[v];
    view.camera = cams[v];
    render_ground_truth(ds.scene, view.camera, view.gt_depth, view.gt_normal, view.foreground);
    if (options.shadows) {
      render_shadows(ds.scene, view.camera, view.gt_depth, view.gt_normal, view.foreground,
                     ds.scene.phi_gt, options.light_samples, mix_seed(options.seed, v), view.shadow);
    } else {
      for (auto& m : view.shadow) m = FloatMap(options.width, options.height);
    }
    synthesize_bse(view.gt_normal, view.foreground, view.shadow, ds.scene.phi_gt,
                   options.noise_sigma, mix_seed(options.seed, 0x5151 + v), view.bse);
    degrade_depth(view.gt_depth, view.foreground, options.blur_radius, options.noise_amp,
                  options.confidence, mix_seed(options.seed, 0x7e57 + v), view.coarse_depth,
                  view.confidence);
  }
  return ds;
}

}  // namespace nfsem
