#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace nfsem {

enum class Ablation { kNone, kNoBseF, kNoPolyR, kNo4qVar, kNoSMask };

std::string ablation_name(Ablation a);
Ablation ablation_from_name(const std::string& name);

// Training hyperparameters. Stage boundaries follow the three-stage
// schedule: depth-only until t1, all-ones-mask photometric term until t2,
// dynamic shadow masking until t3.
struct TrainConfig {
  double lambda1 = 0.1;  // depth loss; simulator datasets override to 0.5
  double lambda2 = 0.1;  // eikonal regularizer
  double lambda3 = 1.0;  // photometric loss
  double lambda4 = 1.0;  // forward-model variance regularizer
  int t1 = 1000;
  int t2 = 2000;
  int t3 = 3000;
  double alpha = 0.25;   // shadow threshold factor
  int rays_per_batch = 256;
  int samples_per_ray = 1024;
  double tilt_cutoff_deg = 60.0;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::kNone;
  bool lambda1_explicit = false;  // set when a config file pinned lambda1

  void validate() const;  // throws on 0 < t1 < t2 < t3 or lambda violations
};

struct RunConfig {
  TrainConfig train;
  int mesh_resolution = 256;
  int eval_samples = 0;  // 0 = samples_per_ray
};

// Flat key = value text format; '#' starts a comment. Unknown keys are
// rejected with the offending name.
TrainConfig parse_train_config(const std::string& path, const TrainConfig& defaults = {});
std::map<std::string, std::string> parse_key_values(const std::string& path);
std::string train_config_to_string(const TrainConfig& cfg);

}  // namespace nfsem
