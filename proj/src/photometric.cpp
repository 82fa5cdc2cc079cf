#include "nfsem/photometric.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>
#include <vector>

#include "nfsem/parallel.hpp"

namespace nfsem {

PsGradients ps_gradients(const FloatMap& b_a, const FloatMap& b_b, const FloatMap& b_c,
                         const FloatMap& b_d, double d_over_c, double detector_rotation) {
  if (!b_a.same_shape(b_b) || !b_a.same_shape(b_c) || !b_a.same_shape(b_d))
    throw std::invalid_argument("ps_gradients: quadrant shape mismatch");
  const int w = b_a.width(), h = b_a.height();
  PsGradients out;
  out.gx = FloatMap(w, h);
  out.gy = FloatMap(w, h);
  out.valid = Image<std::uint8_t>(w, h, 1, 0);
  const double c_over_d = 1.0 / d_over_c;
  const double cr = std::cos(detector_rotation);
  const double sr = std::sin(detector_rotation);
  parallel_for(static_cast<std::int64_t>(b_a.pixel_count()), [&](std::int64_t i) {
    const auto idx = static_cast<std::size_t>(i);
    const double sum_ab = static_cast<double>(b_a[idx]) + b_b[idx];
    const double sum_cd = static_cast<double>(b_c[idx]) + b_d[idx];
    if (sum_ab <= 0.0 || sum_cd <= 0.0) return;
    const double raw_x = (b_a[idx] - b_b[idx]) / sum_ab * c_over_d;
    const double raw_y = (b_c[idx] - b_d[idx]) / sum_cd * c_over_d;
    // Detector axes sit at detector_rotation in the image frame.
    out.gx[idx] = static_cast<float>(cr * raw_x - sr * raw_y);
    out.gy[idx] = static_cast<float>(sr * raw_x + cr * raw_y);
    out.valid[idx] = 1;
  });
  return out;
}

void infill_nearest(FloatMap& map, const Image<std::uint8_t>& valid) {
  const int w = map.width(), h = map.height();
  std::vector<std::int32_t> source(map.pixel_count(), -1);
  std::deque<std::int32_t> queue;
  for (std::size_t i = 0; i < map.pixel_count(); ++i)
    if (valid[i]) {
      source[i] = static_cast<std::int32_t>(i);
      queue.push_back(static_cast<std::int32_t>(i));
    }
  if (queue.empty()) return;
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const std::int32_t i = queue.front();
    queue.pop_front();
    const int x = i % w, y = i / w;
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
      const std::int32_t j = ny * w + nx;
      if (source[j] >= 0) continue;
      source[j] = source[i];
      queue.push_back(j);
    }
  }
  for (std::size_t i = 0; i < map.pixel_count(); ++i)
    if (!valid[i]) map[i] = map[static_cast<std::size_t>(source[i])];
}

namespace {

// A^T A z for the forward-difference least-squares system, restricted to the
// valid mask (invalid pixels carry no equations and stay zero).
void apply_normal_matrix(const Image<std::uint8_t>& valid, const std::vector<double>& z,
                         std::vector<double>& out, int w, int h) {
  parallel_for(static_cast<std::int64_t>(w) * h, [&](std::int64_t i) {
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    const auto idx = static_cast<std::size_t>(i);
    out[idx] = 0.0;
    if (!valid[idx]) return;
    double acc = 0.0;
    // Equations D z = g where this pixel is the left/top member.
    if (x + 1 < w && valid[idx + 1]) acc += z[idx] - z[idx + 1];
    if (y + 1 < h && valid[idx + w]) acc += z[idx] - z[idx + w];
    // Equations where this pixel is the right/bottom member.
    if (x > 0 && valid[idx - 1]) acc += z[idx] - z[idx - 1];
    if (y > 0 && valid[idx - static_cast<std::size_t>(w)])
      acc += z[idx] - z[idx - static_cast<std::size_t>(w)];
    out[idx] = acc;
  });
}

double masked_dot(const std::vector<double>& a, const std::vector<double>& b) {
  // Serial fixed-order reduction keeps the solve deterministic.
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

IntegrationResult integrate_gradients(const FloatMap& gx, const FloatMap& gy,
                                      const Image<std::uint8_t>& valid, double rel_tol) {
  if (!gx.same_shape(gy) || gx.width() != valid.width() || gx.height() != valid.height())
    throw std::invalid_argument("integrate_gradients: shape mismatch");
  const int w = gx.width(), h = gx.height();
  const std::size_t n = gx.pixel_count();
  std::size_t n_valid = 0;
  for (std::size_t i = 0; i < n; ++i) n_valid += valid[i] ? 1u : 0u;
  if (n_valid == 0) throw std::invalid_argument("integrate_gradients: empty valid mask");

  // b = A^T g.
  std::vector<double> b(n, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!valid[i]) continue;
      if (x + 1 < w && valid[i + 1]) {
        b[i] -= gx[i];
        b[i + 1] += gx[i];
      }
      if (y + 1 < h && valid[i + static_cast<std::size_t>(w)]) {
        b[i] -= gy[i];
        b[i + static_cast<std::size_t>(w)] += gy[i];
      }
    }

  std::vector<double> z(n, 0.0), r = b, p = b, ap(n, 0.0);
  const double b_norm = std::sqrt(masked_dot(b, b));
  IntegrationResult res;
  res.height = FloatMap(w, h);
  if (b_norm == 0.0) {
    res.residual = 0.0;
    return res;  // all-zero gradients integrate to the zero-mean constant
  }

  double rs = masked_dot(r, r);
  const std::int64_t max_iters = 10LL * w * h;
  std::int64_t it = 0;
  for (; it < max_iters; ++it) {
    if (std::sqrt(rs) <= rel_tol * b_norm) break;
    apply_normal_matrix(valid, p, ap, w, h);
    const double pap = masked_dot(p, ap);
    if (pap <= 0.0) break;  // numerically exhausted
    const double alpha = rs / pap;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    const double rs_new = masked_dot(r, r);
    const double beta = rs_new / rs;
    rs = rs_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  res.iterations = static_cast<int>(it);
  res.residual = std::sqrt(rs) / b_norm;
  if (res.residual > rel_tol * 10.0 && it >= max_iters)
    throw std::runtime_error("integrate_gradients: CG did not converge, relative residual " +
                             std::to_string(res.residual));

  // Gauge-fix to zero mean over the valid mask.
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (valid[i]) mean += z[i];
  mean /= static_cast<double>(n_valid);
  for (std::size_t i = 0; i < n; ++i)
    res.height[i] = valid[i] ? static_cast<float>(z[i] - mean) : 0.0f;
  return res;
}

PsReconstruction ps_reconstruct(const FloatMap& b_a, const FloatMap& b_b, const FloatMap& b_c,
                                const FloatMap& b_d, const FloatMap& coarse_depth,
                                const Image<std::uint8_t>& foreground, double d_over_c,
                                double detector_rotation, double pixel_size,
                                bool rescale_to_coarse) {
  PsReconstruction out;
  out.grads = ps_gradients(b_a, b_b, b_c, b_d, d_over_c, detector_rotation);
  // Restrict to the evaluation foreground and patch invalid interior pixels.
  Image<std::uint8_t> mask = foreground;
  Image<std::uint8_t> grad_valid(mask.width(), mask.height(), 1, 0);
  for (std::size_t i = 0; i < mask.pixel_count(); ++i)
    grad_valid[i] = mask[i] && out.grads.valid[i] ? 1 : 0;
  bool any_valid = false;
  for (std::size_t i = 0; i < grad_valid.pixel_count(); ++i) any_valid |= grad_valid[i] != 0;
  if (!any_valid) throw std::runtime_error("ps_reconstruct: no valid pixels");
  infill_nearest(out.grads.gx, grad_valid);
  infill_nearest(out.grads.gy, grad_valid);

  // Slopes (scene units per scene unit) to per-pixel differences. Image rows
  // run opposite the camera +y axis, hence the flip.
  FloatMap gx_pix(mask.width(), mask.height()), gy_pix(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
    gx_pix[i] = static_cast<float>(out.grads.gx[i] * pixel_size);
    gy_pix[i] = static_cast<float>(-out.grads.gy[i] * pixel_size);
  }

  IntegrationResult integ = integrate_gradients(gx_pix, gy_pix, mask);
  out.cg_iterations = integ.iterations;

  // Align to the coarse model: always match its mean (integration only
  // recovers shape up to a constant); match its range too when the ratio
  // d/c was a guess.
  double coarse_mean = 0.0, coarse_min = 1e30, coarse_max = -1e30;
  double ps_min = 1e30, ps_max = -1e30;
  std::size_t n_fg = 0;
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
    if (!mask[i]) continue;
    ++n_fg;
    coarse_mean += coarse_depth[i];
    coarse_min = std::fmin(coarse_min, coarse_depth[i]);
    coarse_max = std::fmax(coarse_max, coarse_depth[i]);
    ps_min = std::fmin(ps_min, integ.height[i]);
    ps_max = std::fmax(ps_max, integ.height[i]);
  }
  coarse_mean /= static_cast<double>(n_fg);
  double scale = 1.0;
  if (rescale_to_coarse && ps_max - ps_min > 1e-12)
    scale = (coarse_max - coarse_min) / (ps_max - ps_min);

  out.depth = FloatMap(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.pixel_count(); ++i)
    out.depth[i] = mask[i] ? static_cast<float>(integ.height[i] * scale + coarse_mean) : 0.0f;
  return out;
}

}  // namespace nfsem
