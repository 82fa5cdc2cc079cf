#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "nfsem/adam.hpp"
#include "nfsem/config.hpp"
#include "nfsem/dataset.hpp"
#include "nfsem/field.hpp"
#include "nfsem/forward_model.hpp"
#include "nfsem/tape.hpp"

namespace nfsem {

struct StepLog {
  int step = 0;
  int stage = 0;
  double total = 0.0;
  double depth_term = 0.0;
  double eikonal_term = 0.0;
  double bse_term = 0.0;
  double phi_reg_term = 0.0;
  double mask_fill = 1.0;  // unmasked fraction among photometrically valid rays
  double sharpness = 0.0;
  int hit_rays = 0;
  int bse_rays = 0;
};

struct TrainResult {
  FieldConfig field_config;
  std::vector<double> params;  // [field | phi slots | aux d/c ratio]
  ForwardModelParams phi;
  std::vector<StepLog> logs;
};

// Plain-value loss helpers mirroring the batch terms.
// depth: (1/M) sum w |zhat - z| over hit rays, M = hit count.
double depth_loss_value(std::span<const double> z_hat, std::span<const double> z,
                        std::span<const double> w, std::span<const std::uint8_t> hit);
// eikonal: mean (|g| - 1)^2 over sample gradient norms.
double eikonal_loss_value(std::span<const double> gradient_norms);
// bse: (1/(4M')) sum_q sum_j S |F - b| over valid rays, M' = valid count.
double bse_loss_value(std::span<const double> f_pred, std::span<const double> b_obs,
                      std::span<const std::uint8_t> mask, std::span<const std::uint8_t> valid,
                      int n_rays);

// Three-stage trainer over a loaded dataset. One instance owns the flat
// parameter vector; optimizer steps are atomic and deterministic for a
// fixed seed and thread-count-independent by construction (per-ray tapes
// run in parallel, gradients accumulate in ray order).
class Trainer {
 public:
  Trainer(const Dataset& dataset, const TrainConfig& cfg);

  // Runs steps 1..t3; optionally streams one JSON line per step.
  TrainResult run(std::ostream* jsonl = nullptr);

  // One optimizer step at the given 1-based step index.
  StepLog step(int beta);

  const SdfField& field() const { return field_; }
  const TrainConfig& config() const { return cfg_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }
  std::size_t phi_offset() const { return phi_offset_; }
  std::size_t aux_offset() const { return aux_offset_; }
  ForwardModelParams current_phi() const;
  int stage_of(int beta) const;

 private:
  struct RaySample;  // per-ray batch record
  struct Prepass;

  void sample_batch(int beta, std::vector<RaySample>& batch) const;
  void prepass_ray(const RaySample& ray, int stage, Prepass& out) const;

  const Dataset& data_;
  TrainConfig cfg_;
  SdfField field_;
  ForwardModelParams phi_meta_;  // emission mode, sharing, rotation
  std::size_t phi_offset_ = 0;
  std::size_t aux_offset_ = 0;
  std::vector<double> params_;
  std::vector<double> grads_;
  AdamState adam_;
  std::vector<std::unique_ptr<ad::Tape>> tapes_;
  int zero_mask_streak_ = 0;
  bool warned_empty_mask_ = false;
  bool warned_clamp_ = false;
};

}  // namespace nfsem
