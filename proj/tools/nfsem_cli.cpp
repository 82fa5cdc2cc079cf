#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nfsem/checkpoint.hpp"
#include "nfsem/config.hpp"
#include "nfsem/dataset.hpp"
#include "nfsem/mesh.hpp"
#include "nfsem/metrics.hpp"
#include "nfsem/photometric.hpp"
#include "nfsem/simulator.hpp"
#include "nfsem/trainer.hpp"

namespace fs = std::filesystem;
using namespace nfsem;

namespace {

int cmd_simulate(const std::string& scene_name, int views, int width, int height,
                 const std::string& out_dir, std::uint64_t seed, double sigma, bool no_shadows,
                 int light_samples, const std::string& phi_preset_name, double scene_scale) {
  Scene scene = make_scene(scene_name);
  scene.scene_scale = scene_scale;
  SimulatorOptions opt;
  opt.n_views = views;
  opt.width = width;
  opt.height = height;
  opt.seed = seed;
  opt.noise_sigma = sigma;
  opt.shadows = !no_shadows;
  opt.light_samples = light_samples;
  opt.phi_preset = phi_preset_name;
  SimulatedDataset ds = simulate_dataset(scene, opt);
  const std::string manifest = write_dataset(out_dir, ds);
  std::cout << "wrote " << manifest << " (" << ds.views.size() << " views)\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_dir, std::uint64_t seed, const std::string& ablation,
              int steps_override) {
  Dataset data = load_dataset(data_dir);

  TrainConfig cfg;
  if (!config_path.empty()) cfg = parse_train_config(config_path);
  if (!cfg.lambda1_explicit && !data.scene_name.empty()) cfg.lambda1 = 0.5;  // simulated scenes
  if (seed != static_cast<std::uint64_t>(-1)) cfg.seed = seed;
  if (!ablation.empty()) cfg.ablation = ablation_from_name(ablation);
  if (steps_override > 0) {
    cfg.t1 = std::max(1, steps_override / 3);
    cfg.t2 = std::max(cfg.t1 + 1, 2 * steps_override / 3);
    cfg.t3 = std::max(cfg.t2 + 1, steps_override);
  }
  cfg.validate();

  fs::create_directories(out_dir);
  std::ofstream log((fs::path(out_dir) / "train_log.jsonl").string());
  std::ofstream cfg_out((fs::path(out_dir) / "config_used.cfg").string());
  cfg_out << train_config_to_string(cfg);
  cfg_out.close();

  Trainer trainer(data, cfg);
  TrainResult result = trainer.run(&log);

  const std::string field_path = (fs::path(out_dir) / "field.ckpt").string();
  const std::string phi_path = (fs::path(out_dir) / "phi.json").string();
  save_field_checkpoint(field_path, result.field_config, result.params);
  save_phi_checkpoint(phi_path, result.phi);
  std::cout << "field checkpoint " << field_path << " digest " << file_digest(field_path) << "\n";
  std::cout << "phi checkpoint " << phi_path << " digest " << file_digest(phi_path) << "\n";
  return 0;
}

int cmd_baseline(const std::string& data_dir, int view_index, const std::string& out_dir) {
  Dataset data = load_dataset(data_dir);
  if (view_index < 0 || view_index >= static_cast<int>(data.views.size()))
    throw std::runtime_error("baseline: view index out of range");
  const ViewRecord& view = data.views[static_cast<std::size_t>(view_index)];
  if (view.camera.intr.type != Intrinsics::Type::kOrtho)
    throw std::runtime_error("baseline: the photometric-stereo path expects orthographic views");

  double ratio = 1.0;
  bool rescale = true;
  if (data.phi_gt) {
    const auto& phi = *data.phi_gt;
    ratio = (phi.d[0] + phi.d[1] + phi.d[2] + phi.d[3]) / (phi.c[0] + phi.c[1] + phi.c[2] + phi.c[3]);
    rescale = false;
  }
  Image<std::uint8_t> fg = view.gt_mask ? *view.gt_mask
                                        : Image<std::uint8_t>(data.width, data.height, 1, 1);
  const double rotation = data.phi_gt ? data.phi_gt->detector_rotation : 0.0;
  PsReconstruction rec =
      ps_reconstruct(view.bse[0], view.bse[1], view.bse[2], view.bse[3], view.depth, fg, ratio,
                     rotation, view.camera.intr.pixel_size, rescale);

  fs::create_directories(out_dir);
  const std::string map_path = (fs::path(out_dir) / "ps_depth.fmap").string();
  write_float_map(map_path, rec.depth);
  TriangleMesh mesh = height_map_mesh(rec.depth, fg, view.camera.intr.pixel_size);
  write_obj((fs::path(out_dir) / "ps_surface.obj").string(), mesh);
  write_mesh_sidecar((fs::path(out_dir) / "ps_surface.json").string(), data.scene_scale, 0);

  if (view.gt_depth) {
    double mae = 0.0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < fg.pixel_count(); ++i)
      if (fg[i]) {
        mae += std::fabs(static_cast<double>(rec.depth[i]) - (*view.gt_depth)[i]);
        ++n;
      }
    mae = n ? data.scene_scale * mae / n : 0.0;
    std::cout << "ps baseline view " << view_index << " depth MAE " << mae << " um (cg "
              << rec.cg_iterations << " iters)\n";
  }
  std::cout << "wrote " << map_path << "\n";
  return 0;
}

int cmd_eval(const std::string& data_dir, const std::string& ckpt_path, std::string phi_path,
             const std::string& out_path, int samples) {
  Dataset data = load_dataset(data_dir);
  FieldCheckpoint ckpt = load_field_checkpoint(ckpt_path);
  if (phi_path.empty()) phi_path = (fs::path(ckpt_path).parent_path() / "phi.json").string();
  const ForwardModelParams phi = load_phi_checkpoint(phi_path);
  SdfField field(ckpt.config);
  const EvalReport report =
      evaluate(data, field, ckpt.params, phi, samples > 0 ? samples : 256);
  write_eval_report(out_path, report);
  std::cout << "e_depth " << report.e_depth << " um (coarse " << report.coarse_e_depth << ")\n"
            << "e_normal " << report.e_normal << " deg (coarse " << report.coarse_e_normal
            << ")\n";
  if (report.e_bse) std::cout << "e_bse " << *report.e_bse << "\n";
  if (report.s_shadow) std::cout << "s_shadow " << *report.s_shadow << "%\n";
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_mesh(const std::string& ckpt_path, int resolution, const std::string& out_base) {
  FieldCheckpoint ckpt = load_field_checkpoint(ckpt_path);
  SdfField field(ckpt.config);
  TriangleMesh mesh = marching_cubes(field, ckpt.params, resolution);
  if (mesh.triangles.empty()) std::cerr << "warning: empty iso-surface\n";
  write_obj(out_base + ".obj", mesh);
  write_ply(out_base + ".ply", mesh);
  write_mesh_sidecar(out_base + ".json", ckpt.config.scene_scale, resolution);
  std::cout << "wrote " << out_base << ".obj/.ply (" << mesh.vertices.size() << " vertices, "
            << mesh.triangles.size() << " triangles)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view 4Q-BSE surface reconstruction: simulate, train, baseline, eval, mesh"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  std::string scene = "sphere", out_dir = "dataset", phi_preset_name;
  int views = 9, width = 128, height = 96, light_samples = 64;
  std::uint64_t seed = 0;
  double sigma = 0.9142, scene_scale = 20.0;
  bool no_shadows = false;
  sim->add_option("--scene", scene, "Scene name")->check(CLI::IsMember(scene_names()));
  sim->add_option("--views", views, "Rig subset size (1 + 4k, up to 37)");
  sim->add_option("--width", width, "Image width");
  sim->add_option("--height", height, "Image height");
  sim->add_option("--out", out_dir, "Output directory")->required();
  sim->add_option("--seed", seed, "Random seed");
  sim->add_option("--sigma", sigma, "Additive Gaussian image noise");
  sim->add_flag("--no-shadows", no_shadows, "Disable shadow rendering");
  sim->add_option("--shadow-samples", light_samples, "Area-light samples per pixel");
  sim->add_option("--phi-preset", phi_preset_name, "Detector preset: varied|ps-exact|uniform");
  sim->add_option("--scene-scale", scene_scale, "Micrometers per scene unit");

  // train
  auto* train = app.add_subcommand("train", "Train the neural field on a dataset");
  std::string data_dir, config_path, run_dir = "run", ablation;
  std::uint64_t train_seed = static_cast<std::uint64_t>(-1);
  int steps = 0;
  train->add_option("--data", data_dir, "Dataset directory")->required();
  train->add_option("--config", config_path, "Training config file");
  train->add_option("--out", run_dir, "Run output directory");
  train->add_option("--seed", train_seed, "Random seed (overrides config)");
  train->add_option("--ablation", ablation,
                    "none|no_bse_f|no_poly_r|no_4q_var|no_s_mask (overrides config)");
  train->add_option("--steps", steps, "Total steps; stage bounds set to 1/3 and 2/3");

  // baseline
  auto* base = app.add_subcommand("baseline", "Classical photometric-stereo reconstruction");
  std::string base_data, base_out = "baseline";
  int view_index = 0;
  base->add_option("--data", base_data, "Dataset directory")->required();
  base->add_option("--view", view_index, "View index");
  base->add_option("--out", base_out, "Output directory");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against ground truth");
  std::string eval_data, eval_ckpt, eval_phi, eval_out = "report.json";
  int eval_samples = 0;
  eval->add_option("--data", eval_data, "Dataset directory")->required();
  eval->add_option("--checkpoint", eval_ckpt, "Field checkpoint")->required();
  eval->add_option("--phi", eval_phi, "Forward-model checkpoint (default: sibling phi.json)");
  eval->add_option("--out", eval_out, "Report path");
  eval->add_option("--samples", eval_samples, "Samples per ray for map rendering");

  // mesh
  auto* mesh = app.add_subcommand("mesh", "Extract a triangle mesh from a checkpoint");
  std::string mesh_ckpt, mesh_out = "mesh";
  int resolution = 256;
  mesh->add_option("--checkpoint", mesh_ckpt, "Field checkpoint")->required();
  mesh->add_option("--resolution", resolution, "Voxel grid resolution");
  mesh->add_option("--out", mesh_out, "Output base name (.obj/.ply/.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return cmd_simulate(scene, views, width, height, out_dir, seed, sigma, no_shadows,
                          light_samples, phi_preset_name, scene_scale);
    if (train->parsed())
      return cmd_train(data_dir, config_path, run_dir, train_seed, ablation, steps);
    if (base->parsed()) return cmd_baseline(base_data, view_index, base_out);
    if (eval->parsed()) return cmd_eval(eval_data, eval_ckpt, eval_phi, eval_out, eval_samples);
    if (mesh->parsed()) return cmd_mesh(mesh_ckpt, resolution, mesh_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
