#include "nfsem/render.hpp"

#include <cmath>
#include <vector>

namespace nfsem {

namespace {
double logistic(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
}  // namespace

RenderResult render_ray(const SdfField& field, std::span<const double> params, const Ray& ray,
                        const RenderOptions& opt, const double* jitter) {
  RenderResult res;
  const int n = opt.n_samples;
  if (n < 2 || !(ray.t_far > ray.t_near)) return res;
  const double dt = (ray.t_far - ray.t_near) / n;
  const double kappa = field.sharpness(params);

  std::vector<double> ts(n), sig(n);
  for (int k = 0; k < n; ++k) {
    const double u = jitter ? jitter[k] : 0.5;
    ts[k] = ray.t_near + (k + u) * dt;
    sig[k] = logistic(kappa * field.sdf(ray.at(ts[k]), params));
  }

  std::vector<double> w(n - 1);
  double transmittance = 1.0;
  double hit_weight = 0.0;
  for (int k = 0; k + 1 < n; ++k) {
    const double alpha = std::fmax((sig[k] - sig[k + 1]) / sig[k], 0.0);
    w[k] = alpha * transmittance;
    transmittance *= 1.0 - alpha;
    hit_weight += w[k];
  }
  res.hit_weight = hit_weight;
  if (hit_weight < 1e-8) return res;

  double depth_num = 0.0;
  Vec3 grad_sum;
  for (int k = 0; k + 1 < n; ++k) {
    if (w[k] <= 0.0) continue;
    depth_num += w[k] * ts[k];
    if (w[k] >= opt.weight_cutoff)
      grad_sum += w[k] * field.sdf_gradient(ray.at(ts[k]), params);
  }
  res.depth = depth_num / hit_weight;
  const double gn = norm(grad_sum);
  if (gn < 1e-12) return res;
  res.normal = grad_sum / gn;
  res.hit = hit_weight >= opt.hit_threshold;
  return res;
}

RayTapeNodes emit_render_ray(ad::Tape& tape, const SdfField& field, const FieldTapeLeaves& leaves,
                             const Ray& ray, const RenderOptions& opt, const double* jitter) {
  RayTapeNodes out;
  const int n = opt.n_samples;
  out.n_samples = n;
  if (n < 2 || !(ray.t_far > ray.t_near)) return out;
  const double dt = (ray.t_far - ray.t_near) / n;

  std::vector<double> ts(n);
  std::vector<SdfSampleNodes> samples(n);
  for (int k = 0; k < n; ++k) {
    const double u = jitter ? jitter[k] : 0.5;
    ts[k] = ray.t_near + (k + u) * dt;
    samples[k] = field.emit_sample(tape, leaves, ray.at(ts[k]));
  }

  // Eikonal block: exactly three nodes per sample -> strided sum.
  ad::NodeId eik_first = 0;
  for (int k = 0; k < n; ++k) {
    const ad::NodeId gnorm = tape.norm(samples[k].gradient[0], 2, 3);
    const ad::NodeId centered = tape.addc(gnorm, -1.0);
    const ad::NodeId sq = tape.powc(centered, 2.0);
    if (k == 0) eik_first = sq;
  }
  out.eikonal_sum = tape.sum(eik_first, 3, static_cast<std::uint32_t>(n));

  // Sigmoid block: two nodes per sample.
  ad::NodeId sig_first = 0;
  for (int k = 0; k < n; ++k) {
    const ad::NodeId scaled = tape.mul(leaves.sharpness, samples[k].sdf);
    const ad::NodeId s = tape.sigmoid(scaled);
    if (k == 0) sig_first = s;
  }
  auto sig_id = [&](int k) { return sig_first + static_cast<ad::NodeId>(2 * k); };

  // Alpha/transmittance chain: six nodes per interval, weight at offset 3.
  const ad::NodeId one = tape.constant(1.0);
  ad::NodeId transmittance = one;
  ad::NodeId w_first = 0;
  for (int k = 0; k + 1 < n; ++k) {
    const ad::NodeId num = tape.sub(sig_id(k), sig_id(k + 1));
    const ad::NodeId frac = tape.div(num, sig_id(k));
    const ad::NodeId alpha = tape.relu(frac);
    const ad::NodeId w = tape.mul(alpha, transmittance);
    const ad::NodeId rem = tape.sub(one, alpha);
    transmittance = tape.mul(transmittance, rem);
    if (k == 0) w_first = w;
  }
  out.hit_weight = tape.sum(w_first, 6, static_cast<std::uint32_t>(n - 1));
  out.hit_weight_value = tape.value(out.hit_weight);
  out.hit = out.hit_weight_value >= opt.hit_threshold;
  if (out.hit_weight_value < 1e-8) return out;

  auto w_id = [&](int k) { return w_first + static_cast<ad::NodeId>(6 * k); };

  // depth = sum w_k t_k / sum w_k.
  ad::NodeId wt_first = 0;
  for (int k = 0; k + 1 < n; ++k) {
    const ad::NodeId wt = tape.mulc(w_id(k), ts[k]);
    if (k == 0) wt_first = wt;
  }
  const ad::NodeId depth_num = tape.sum(wt_first, 1, static_cast<std::uint32_t>(n - 1));
  out.depth = tape.div(depth_num, out.hit_weight);

  // normal = normalize(sum w_k grad_k).
  std::array<ad::NodeId, 3> gsum{};
  for (int d = 0; d < 3; ++d) {
    ad::NodeId first = 0;
    for (int k = 0; k + 1 < n; ++k) {
      const ad::NodeId m = tape.mul(w_id(k), samples[k].gradient[d]);
      if (k == 0) first = m;
    }
    gsum[d] = tape.sum(first, 1, static_cast<std::uint32_t>(n - 1));
  }
  // gsum nodes are interleaved with the per-component mul blocks, so gather
  // the norm from a compact copy block.
  const ad::NodeId gx = tape.addc(gsum[0], 0.0);
  tape.addc(gsum[1], 0.0);
  tape.addc(gsum[2], 0.0);
  const ad::NodeId gnorm = tape.norm(gx, 1, 3);
  for (int d = 0; d < 3; ++d)
    out.normal[d] = tape.div(gx + static_cast<ad::NodeId>(d), gnorm);
  return out;
}

}  // namespace nfsem
