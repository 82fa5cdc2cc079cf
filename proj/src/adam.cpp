#include "nfsem/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "nfsem/parallel.hpp"

namespace nfsem {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  const std::size_t n = params.size();
  if (grads.size() != n) throw std::invalid_argument("adam_step: gradient length mismatch");
  if (state.first_moment.size() != n || state.second_moment.size() != n)
    throw std::invalid_argument("adam_step: state length mismatch");

  state.step_count += 1;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
  const double lr = state.learning_rate;
  const double eps = state.epsilon;

  double* m = state.first_moment.data();
  double* v = state.second_moment.data();
  double* p = params.data();
  const double* g = grads.data();

  parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  });
}

}  // namespace nfsem
