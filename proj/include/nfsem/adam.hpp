#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace nfsem {

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(std::size_t n = 0, double lr = 0.01)
      : first_moment(n, 0.0), second_moment(n, 0.0), learning_rate(lr) {}
};

// One bias-corrected Adam update, in place. Elementwise and deterministic.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

}  // namespace nfsem
