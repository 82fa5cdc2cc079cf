#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "nfsem/dataset.hpp"
#include "nfsem/parallel.hpp"
#include "nfsem/simulator.hpp"
#include "nfsem/trainer.hpp"

using namespace nfsem;
namespace fs = std::filesystem;

namespace {

struct TempDataset {
  fs::path dir;
  Dataset data;

  explicit TempDataset(const std::string& scene_name, bool shadows = false, int views = 5,
                       int width = 48, int height = 36) {
    dir = fs::temp_directory_path() /
          ("nfsem_trainer_" + scene_name + (shadows ? "_sh" : "") + std::to_string(::getpid()));
    Scene scene = make_scene(scene_name);
    SimulatorOptions opt;
    opt.n_views = views;
    opt.width = width;
    opt.height = height;
    opt.shadows = shadows;
    opt.light_samples = 16;
    write_dataset(dir.string(), simulate_dataset(scene, opt));
    data = load_dataset(dir.string());
  }
  ~TempDataset() { fs::remove_all(dir); }
};

TrainConfig desk_config() {
  TrainConfig cfg;
  cfg.lambda1 = 0.5;
  cfg.rays_per_batch = 32;
  cfg.samples_per_ray = 24;
  cfg.t1 = 4;
  cfg.t2 = 8;
  cfg.t3 = 12;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("plain-value loss helpers reproduce the documented cases") {
  // depth: zero when zhat == z; zero when all confidences vanish.
  const std::vector<double> z{1.0, 2.0, 3.0};
  const std::vector<std::uint8_t> hit{1, 1, 1};
  CHECK(depth_loss_value(z, z, {{0.3, 0.3, 0.3}}, hit) == 0.0);
  const std::vector<double> zhat{1.5, 2.5, 3.5};
  CHECK(depth_loss_value(zhat, z, {{0.0, 0.0, 0.0}}, hit) == 0.0);
  CHECK(depth_loss_value(zhat, z, {{1.0, 1.0, 1.0}}, hit) == doctest::Approx(0.5));
  // no-hit rays drop out of both the sum and the normalizer.
  const std::vector<std::uint8_t> partial{1, 0, 0};
  CHECK(depth_loss_value(zhat, z, {{1.0, 1.0, 1.0}}, partial) == doctest::Approx(0.5));

  // eikonal: exact unit norms -> 0; |g| = 2 -> 1.
  CHECK(eikonal_loss_value({{1.0, 1.0, 1.0}}) == doctest::Approx(0.0));
  CHECK(eikonal_loss_value({{2.0, 2.0}}) == doctest::Approx(1.0));

  // bse: exact prediction -> 0; all-masked -> 0.
  const std::vector<double> f{10, 20, 30, 40};
  const std::vector<std::uint8_t> ones{1, 1, 1, 1};
  const std::vector<std::uint8_t> valid{1};
  CHECK(bse_loss_value(f, f, ones, valid, 1) == 0.0);
  const std::vector<double> b{11, 21, 31, 41};
  CHECK(bse_loss_value(f, b, {{0, 0, 0, 0}}, valid, 1) == 0.0);
  CHECK(bse_loss_value(f, b, ones, valid, 1) == doctest::Approx(1.0));
}

TEST_CASE("loss schedule is exact at the stage boundaries") {
  TempDataset ds("sphere");
  TrainConfig cfg = desk_config();
  Trainer trainer(ds.data, cfg);
  std::vector<StepLog> logs;
  for (int beta = 1; beta <= cfg.t2 + 1; ++beta) logs.push_back(trainer.step(beta));

  // Stage 1 through t1: photometric terms absent.
  for (int beta = 1; beta <= cfg.t1; ++beta) {
    CHECK(logs[beta - 1].stage == 1);
    CHECK(logs[beta - 1].bse_term == 0.0);
    CHECK(logs[beta - 1].phi_reg_term == 0.0);
  }
  // t1+1: the all-ones-mask photometric term appears.
  CHECK(logs[cfg.t1].stage == 2);
  CHECK(logs[cfg.t1].bse_term > 0.0);
  CHECK(logs[cfg.t1].mask_fill == 1.0);
  // t2+1: dynamic masking becomes active.
  CHECK(logs[cfg.t2].stage == 3);
}

TEST_CASE("per-term losses are finite, non-negative and logged") {
  TempDataset ds("sphere");
  Trainer trainer(ds.data, desk_config());
  std::ostringstream jsonl;
  const TrainResult result = trainer.run(&jsonl);
  for (const StepLog& log : result.logs) {
    CHECK(std::isfinite(log.total));
    CHECK(log.depth_term >= 0.0);
    CHECK(log.eikonal_term >= 0.0);
    CHECK(log.bse_term >= 0.0);
    CHECK(log.phi_reg_term >= 0.0);
  }
  // One JSON line per step.
  int lines = 0;
  std::string line;
  std::istringstream in(jsonl.str());
  while (std::getline(in, line)) ++lines;
  CHECK(lines == desk_config().t3);
}

TEST_CASE("identical seed and config give identical logs and parameters") {
  TempDataset ds("sphere");
  const TrainConfig cfg = desk_config();
  Trainer a(ds.data, cfg), b(ds.data, cfg);
  const TrainResult ra = a.run();
  const TrainResult rb = b.run();
  CHECK(ra.params == rb.params);
  for (std::size_t i = 0; i < ra.logs.size(); ++i) {
    CHECK(ra.logs[i].total == rb.logs[i].total);
    CHECK(ra.logs[i].mask_fill == rb.logs[i].mask_fill);
  }
}

TEST_CASE("training is thread-count independent") {
  TempDataset ds("sphere");
  const int saved = max_threads();
  const TrainConfig cfg = desk_config();
  set_threads(1);
  Trainer a(ds.data, cfg);
  const TrainResult ra = a.run();
  set_threads(2);
  Trainer b(ds.data, cfg);
  const TrainResult rb = b.run();
  set_threads(saved);
  CHECK(ra.params == rb.params);
}

TEST_CASE("with zero photometric weights the trainer reduces to stage-1 behavior") {
  TempDataset ds("sphere");
  TrainConfig cfg = desk_config();
  TrainConfig cfg_zero = cfg;
  cfg_zero.lambda3 = 0.0;
  cfg_zero.lambda4 = 0.0;

  // Reference: a config that never leaves stage 1 (t1 pushed past t3).
  Trainer zero(ds.data, cfg_zero);
  for (int beta = 1; beta <= cfg.t3; ++beta) {
    const StepLog log = zero.step(beta);
    CHECK(log.bse_term == 0.0);
    CHECK(log.phi_reg_term == 0.0);
  }
  // Parameters must match a pure stage-1 run step for step.
  TrainConfig cfg_stage1 = cfg;
  cfg_stage1.t1 = cfg.t3 + 1;
  cfg_stage1.t2 = cfg.t3 + 2;
  cfg_stage1.t3 = cfg.t3 + 3;
  Trainer stage1(ds.data, cfg_stage1);
  Trainer zero2(ds.data, cfg_zero);
  for (int beta = 1; beta <= cfg.t3; ++beta) {
    zero2.step(beta);
    stage1.step(beta);
  }
  const auto pa = zero2.parameters();
  const auto pb = stage1.parameters();
  // The field parameters match exactly; phi slots may differ because the
  // zero-weight run still runs its (weightless) bookkeeping.
  for (std::size_t i = 0; i < zero2.field().layout().count; ++i) CHECK(pa[i] == pb[i]);
}

TEST_CASE("no_4q_var keeps quadrant parameters exactly tied") {
  TempDataset ds("sphere");
  TrainConfig cfg = desk_config();
  cfg.ablation = Ablation::kNo4qVar;
  Trainer trainer(ds.data, cfg);
  const TrainResult result = trainer.run();
  const ForwardModelParams phi = result.phi;
  for (int q = 1; q < 4; ++q) {
    CHECK(phi.c[q] == phi.c[0]);
    CHECK(phi.d[q] == phi.d[0]);
    CHECK(phi.e[q] == phi.e[0]);
  }
  CHECK(regularize_phi(phi) == 0.0);
}

TEST_CASE("no_poly_r freezes the polynomial at the secant form") {
  TempDataset ds("sphere");
  TrainConfig cfg = desk_config();
  cfg.ablation = Ablation::kNoPolyR;
  Trainer trainer(ds.data, cfg);
  const TrainResult result = trainer.run();
  CHECK(result.phi.emission == EmissionModel::kSecant);
  for (int k = 0; k < 4; ++k) CHECK(result.phi.p[k] == 0.0);
}

TEST_CASE("no_s_mask runs the all-ones stage-2 loss to the end") {
  TempDataset ds("sphere");
  TrainConfig cfg = desk_config();
  cfg.ablation = Ablation::kNoSMask;
  Trainer trainer(ds.data, cfg);
  for (int beta = 1; beta <= cfg.t3; ++beta) {
    const StepLog log = trainer.step(beta);
    if (beta > cfg.t1) {
      CHECK(log.stage == 2);
      CHECK(log.mask_fill == 1.0);
    }
  }
}

TEST_CASE("no_bse_f replaces the photometric term with normal supervision") {
  TempDataset ds("sphere");
  TrainConfig cfg = desk_config();
  cfg.ablation = Ablation::kNoBseF;
  Trainer trainer(ds.data, cfg);
  bool saw_normal_term = false;
  for (int beta = 1; beta <= cfg.t2; ++beta) {
    const StepLog log = trainer.step(beta);
    if (beta > cfg.t1) {
      CHECK(log.phi_reg_term == 0.0);  // no forward model in this ablation
      saw_normal_term |= log.bse_term > 0.0;
    }
  }
  CHECK(saw_normal_term);
  // The learnable d/c ratio moved away from its initialization.
  CHECK(trainer.parameters()[trainer.aux_offset()] != 0.0);
}

TEST_CASE("nan parameters abort with the step and term identified") {
  TempDataset ds("sphere");
  TrainConfig cfg = desk_config();
  Trainer trainer(ds.data, cfg);
  // Poison the field output bias so every sdf value is NaN.
  trainer.mutable_parameters()[trainer.field().layout().b2_offset] =
      std::numeric_limits<double>::quiet_NaN();
  try {
    trainer.step(1);
    FAIL("expected an abort on non-finite loss");
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    CHECK(msg.find("step 1") != std::string::npos);
    CHECK(msg.find("non-finite") != std::string::npos);
  }
}
