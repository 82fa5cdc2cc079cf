// Serial-vs-parallel timing for the data-parallel kernels. Every kernel is
// a map over disjoint outputs, so the two modes must also agree bit-exactly;
// the mismatch count is printed alongside the timings.

#include <chrono>
#include <cstring>
#include <iostream>
#include <vector>

#include "nfsem/dataset.hpp"
#include "nfsem/mesh.hpp"
#include "nfsem/metrics.hpp"
#include "nfsem/parallel.hpp"
#include "nfsem/photometric.hpp"
#include "nfsem/rng.hpp"
#include "nfsem/simulator.hpp"
#include "nfsem/trainer.hpp"

using namespace nfsem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

template <typename F>
double timed(F&& f) {
  const auto t0 = Clock::now();
  f();
  return seconds(t0, Clock::now());
}

void report(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-22s serial %8.3fs  parallel %8.3fs  speedup %5.2fx  %s\n", name, serial,
              parallel, serial / parallel, identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  const int threads = max_threads();
  std::printf("workers: %d (NFSEM_THREADS caps)\n", threads);

  Scene scene = make_scene("pyramid");
  SimulatorOptions opt;
  opt.n_views = 5;
  opt.shadows = true;
  opt.light_samples = 32;

  // Ground-truth + shadow rendering.
  SimulatedDataset serial_ds, parallel_ds;
  set_threads(1);
  const double t_sim_serial = timed([&] { serial_ds = simulate_dataset(scene, opt); });
  set_threads(threads);
  const double t_sim_parallel = timed([&] { parallel_ds = simulate_dataset(scene, opt); });
  bool sim_same = true;
  for (std::size_t v = 0; v < serial_ds.views.size(); ++v) {
    sim_same &= std::memcmp(serial_ds.views[v].gt_depth.data(),
                            parallel_ds.views[v].gt_depth.data(),
                            serial_ds.views[v].gt_depth.size() * sizeof(float)) == 0;
    for (int q = 0; q < 4; ++q)
      sim_same &= std::memcmp(serial_ds.views[v].shadow[q].data(),
                              parallel_ds.views[v].shadow[q].data(),
                              serial_ds.views[v].shadow[q].size() * sizeof(float)) == 0;
  }
  report("simulate (gt+shadows)", t_sim_serial, t_sim_parallel, sim_same);

  // Training steps (per-ray tapes + Adam).
  const std::string dir = "/tmp/nfsem_bench_ds";
  write_dataset(dir, parallel_ds);
  Dataset data = load_dataset(dir);
  TrainConfig cfg;
  cfg.rays_per_batch = 128;
  cfg.samples_per_ray = 64;
  cfg.t1 = 4;
  cfg.t2 = 8;
  cfg.t3 = 12;
  auto run_steps = [&](int nthreads) {
    set_threads(nthreads);
    Trainer trainer(data, cfg);
    TrainResult res = trainer.run();
    return res.params;
  };
  std::vector<double> params_serial, params_parallel;
  const double t_train_serial = timed([&] { params_serial = run_steps(1); });
  const double t_train_parallel = timed([&] { params_parallel = run_steps(threads); });
  report("train (12 steps)", t_train_serial, t_train_parallel,
         params_serial == params_parallel);

  // Map rendering from the trained field.
  SdfField field(FieldConfig{});
  RenderedMaps maps_serial, maps_parallel;
  set_threads(1);
  const double t_render_serial = timed(
      [&] { maps_serial = render_view_maps(field, params_parallel, data.views[0].camera, 128); });
  set_threads(threads);
  const double t_render_parallel = timed(
      [&] { maps_parallel = render_view_maps(field, params_parallel, data.views[0].camera, 128); });
  report("render maps", t_render_serial, t_render_parallel,
         std::memcmp(maps_serial.depth.data(), maps_parallel.depth.data(),
                     maps_serial.depth.size() * sizeof(float)) == 0 &&
             std::memcmp(maps_serial.normal.data(), maps_parallel.normal.data(),
                         maps_serial.normal.size() * sizeof(float)) == 0);

  // Iso-surface extraction.
  TriangleMesh mesh_serial, mesh_parallel;
  set_threads(1);
  const double t_mesh_serial =
      timed([&] { mesh_serial = marching_cubes(field, params_parallel, 96); });
  set_threads(threads);
  const double t_mesh_parallel =
      timed([&] { mesh_parallel = marching_cubes(field, params_parallel, 96); });
  report("marching cubes (96^3)", t_mesh_serial, t_mesh_parallel,
         mesh_serial.vertices.size() == mesh_parallel.vertices.size() &&
             mesh_serial.triangles == mesh_parallel.triangles);

  // Gradient-field integration (CG).
  const ViewRecord& v0 = data.views[0];
  Image<std::uint8_t> fg = *v0.gt_mask;
  IntegrationResult integ_serial, integ_parallel;
  PsGradients g = ps_gradients(v0.bse[0], v0.bse[1], v0.bse[2], v0.bse[3], 1.0, 0.0);
  set_threads(1);
  const double t_cg_serial = timed([&] { integ_serial = integrate_gradients(g.gx, g.gy, fg); });
  set_threads(threads);
  const double t_cg_parallel = timed([&] { integ_parallel = integrate_gradients(g.gx, g.gy, fg); });
  report("poisson integrate", t_cg_serial, t_cg_parallel,
         std::memcmp(integ_serial.height.data(), integ_parallel.height.data(),
                     integ_serial.height.size() * sizeof(float)) == 0);
  return 0;
}
