#include "nfsem/trainer.hpp"

#include <cmath>
#include <iostream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "nfsem/parallel.hpp"
#include "nfsem/render.hpp"
#include "nfsem/rng.hpp"

namespace nfsem {

using nlohmann::json;

double depth_loss_value(std::span<const double> z_hat, std::span<const double> z,
                        std::span<const double> w, std::span<const std::uint8_t> hit) {
  double sum = 0.0;
  int m = 0;
  for (std::size_t j = 0; j < z_hat.size(); ++j) {
    if (!hit[j]) continue;
    ++m;
    sum += w[j] * std::fabs(z_hat[j] - z[j]);
  }
  return m > 0 ? sum / m : 0.0;
}

double eikonal_loss_value(std::span<const double> gradient_norms) {
  if (gradient_norms.empty()) return 0.0;
  double sum = 0.0;
  for (double g : gradient_norms) sum += (g - 1.0) * (g - 1.0);
  return sum / static_cast<double>(gradient_norms.size());
}

double bse_loss_value(std::span<const double> f_pred, std::span<const double> b_obs,
                      std::span<const std::uint8_t> mask, std::span<const std::uint8_t> valid,
                      int n_rays) {
  double sum = 0.0;
  int m = 0;
  for (int j = 0; j < n_rays; ++j) {
    if (!valid[j]) continue;
    ++m;
    for (int q = 0; q < 4; ++q) {
      const std::size_t i = static_cast<std::size_t>(q) * n_rays + j;
      if (mask[i]) sum += std::fabs(f_pred[i] - b_obs[i]);
    }
  }
  return m > 0 ? sum / (4.0 * m) : 0.0;
}

struct Trainer::RaySample {
  int view = 0;
  int px = 0, py = 0;
  Ray ray;
  bool geom = false;  // ray intersects the scene box
  double z = 0.0, w = 0.0;
  std::array<double, 4> b{};
  std::array<double, 2> ratio{};  // quadrant ratios for the gradient ablation
  bool ratio_valid = false;
  std::vector<double> jitter;
};

struct Trainer::Prepass {
  bool hit = false;
  bool bse_valid = false;
  std::array<std::uint8_t, 4> mask{1, 1, 1, 1};
  Vec3 n_cam;
};

Trainer::Trainer(const Dataset& dataset, const TrainConfig& cfg)
    : data_(dataset), cfg_(cfg), field_(FieldConfig{.scene_scale = dataset.scene_scale}) {
  cfg_.validate();
  if (data_.views.empty()) throw std::invalid_argument("trainer: dataset has no views");

  phi_meta_.emission =
      cfg_.ablation == Ablation::kNoPolyR ? EmissionModel::kSecant : EmissionModel::kPolynomial;
  phi_meta_.shared_quadrants = cfg_.ablation == Ablation::kNo4qVar;

  phi_offset_ = field_.layout().count;
  aux_offset_ = phi_offset_ + kPhiParamCount;
  params_.assign(aux_offset_ + 1, 0.0);
  grads_.assign(params_.size(), 0.0);

  Rng rng(mix_seed(cfg_.seed, 0xf1e1d));
  field_.init_parameters(std::span<double>(params_.data(), field_.layout().count), rng);

  // Forward-model start: R == 1, mid-range gains, offsets matching the mean
  // observed intensity.
  ForwardModelParams phi0 = phi_meta_;
  phi0.c = {30.0, 30.0, 30.0, 30.0};
  phi0.d = {30.0, 30.0, 30.0, 30.0};
  phi0.p = {0.0, 0.0, 0.0, 0.0};
  for (int q = 0; q < 4; ++q) {
    double mean = 0.0;
    std::size_t n = 0;
    for (const auto& view : data_.views) {
      for (std::size_t i = 0; i < view.bse[q].pixel_count(); ++i) mean += view.bse[q][i];
      n += view.bse[q].pixel_count();
    }
    phi0.e[q] = n ? mean / static_cast<double>(n) - phi0.c[q] : 0.0;
  }
  pack_phi(phi0, std::span<double>(params_.data() + phi_offset_, kPhiParamCount));
  params_[aux_offset_] = 0.0;  // log of the learnable d/c ratio

  adam_ = AdamState(params_.size(), cfg_.learning_rate);

  const int nt = max_threads();
  tapes_.reserve(nt);
  for (int t = 0; t < nt; ++t) tapes_.push_back(std::make_unique<ad::Tape>(params_));
}

ForwardModelParams Trainer::current_phi() const {
  return unpack_phi(std::span<const double>(params_.data() + phi_offset_, kPhiParamCount),
                    phi_meta_);
}

int Trainer::stage_of(int beta) const {
  if (beta <= cfg_.t1) return 1;
  if (cfg_.ablation == Ablation::kNoSMask) return 2;  // stage 2 runs to t3
  return beta <= cfg_.t2 ? 2 : 3;
}

void Trainer::sample_batch(int beta, std::vector<RaySample>& batch) const {
  batch.assign(static_cast<std::size_t>(cfg_.rays_per_batch), RaySample{});
  Rng rng(mix_seed(cfg_.seed, 0xbadc0ffe ^ static_cast<std::uint64_t>(beta)));
  const Vec3 lo{0.0, 0.0, 0.0}, hi{1.0, 1.0, 1.0};
  for (std::size_t ridx = 0; ridx < batch.size(); ++ridx) {
    RaySample& s = batch[ridx];
    s.view = static_cast<int>(rng.below(data_.views.size()));
    const ViewRecord& view = data_.views[static_cast<std::size_t>(s.view)];
    s.px = static_cast<int>(rng.below(static_cast<std::uint64_t>(data_.width)));
    s.py = static_cast<int>(rng.below(static_cast<std::uint64_t>(data_.height)));
    s.ray = view.camera.pixel_ray(s.px, s.py);
    double t0, t1;
    s.geom = intersect_box(s.ray.origin, s.ray.dir, lo, hi, t0, t1) && t1 > t0 + 1e-9;
    s.ray.t_near = t0;
    s.ray.t_far = t1;
    s.z = view.depth.at(s.px, s.py);
    s.w = view.confidence.at(s.px, s.py);
    for (int q = 0; q < 4; ++q) s.b[q] = view.bse[q].at(s.px, s.py);
    const double sum_ab = s.b[0] + s.b[1];
    const double sum_cd = s.b[2] + s.b[3];
    s.ratio_valid = sum_ab > 0.0 && sum_cd > 0.0;
    if (s.ratio_valid) {
      s.ratio[0] = (s.b[0] - s.b[1]) / sum_ab;
      s.ratio[1] = (s.b[2] - s.b[3]) / sum_cd;
    }
    s.jitter.resize(static_cast<std::size_t>(cfg_.samples_per_ray));
    Rng jrng(mix_seed(cfg_.seed,
                      (static_cast<std::uint64_t>(beta) << 24) ^ static_cast<std::uint64_t>(ridx)));
    for (auto& u : s.jitter) u = jrng.uniform();
  }
}

void Trainer::prepass_ray(const RaySample& ray, int stage, Prepass& out) const {
  out = Prepass{};
  if (!ray.geom) return;
  RenderOptions opt;
  opt.n_samples = cfg_.samples_per_ray;
  opt.weight_cutoff = 1e-6;
  const RenderResult r = render_ray(field_, params_, ray.ray, opt, ray.jitter.data());
  out.hit = r.hit;
  if (!r.hit) return;
  const ViewRecord& view = data_.views[static_cast<std::size_t>(ray.view)];
  out.n_cam = view.camera.pose.dir_to_camera(r.normal);
  const double cos_cutoff = std::cos(deg_to_rad(cfg_.tilt_cutoff_deg));
  out.bse_valid = out.n_cam.z > cos_cutoff;
  if (cfg_.ablation == Ablation::kNoBseF) out.bse_valid = out.bse_valid && ray.ratio_valid;
  if (stage >= 3 && out.bse_valid && cfg_.ablation != Ablation::kNoBseF) {
    const ForwardModelParams phi = current_phi();
    for (int q = 0; q < 4; ++q) {
      const double f = bse_forward_angles(phi, std::acos(std::fmin(out.n_cam.z, 1.0)),
                                          std::atan2(out.n_cam.y, out.n_cam.x), q);
      out.mask[q] = shadow_mask(f, ray.b[q], q, phi, cfg_.alpha) ? 1 : 0;
    }
  }
}

StepLog Trainer::step(int beta) {
  const int stage = stage_of(beta);
  std::vector<RaySample> batch;
  sample_batch(beta, batch);
  const int n_rays = static_cast<int>(batch.size());

  // Value prepass: hit flags, validity, dynamic masks, normalizer counts.
  std::vector<Prepass> pre(batch.size());
  parallel_for(n_rays, [&](std::int64_t j) { prepass_ray(batch[j], stage, pre[j]); });

  int hit_rays = 0, bse_rays = 0;
  std::int64_t eik_samples = 0;
  std::int64_t mask_on = 0;
  for (int j = 0; j < n_rays; ++j) {
    if (batch[j].geom) eik_samples += cfg_.samples_per_ray;
    if (pre[j].hit) ++hit_rays;
    if (pre[j].hit && pre[j].bse_valid) {
      ++bse_rays;
      for (int q = 0; q < 4; ++q) mask_on += pre[j].mask[q];
    }
  }
  const bool use_bse = stage >= 2;
  const double c_depth = cfg_.lambda1 / std::max(hit_rays, 1);
  const double c_eik = cfg_.lambda2 / static_cast<double>(std::max<std::int64_t>(eik_samples, 1));
  const double c_bse = cfg_.lambda3 / (4.0 * std::max(bse_rays, 1));
  const double c_nrm = cfg_.lambda3 / (3.0 * std::max(bse_rays, 1));

  // Per-ray tape pass: forward, multi-seed backward, gradient packets.
  struct Packet {
    std::vector<std::pair<std::uint32_t, double>> grads;
    double depth_sum = 0.0, eik_sum = 0.0, bse_sum = 0.0;
  };
  std::vector<Packet> packets(batch.size());
  const ForwardModelParams phi_now = current_phi();
  const double cr = std::cos(phi_meta_.detector_rotation);
  const double sr = std::sin(phi_meta_.detector_rotation);

  parallel_for(n_rays, [&](std::int64_t j) {
    const RaySample& rs = batch[j];
    Packet& pk = packets[j];
    if (!rs.geom) return;
    ad::Tape& tape = *tapes_[static_cast<std::size_t>(thread_index())];
    tape.reset();

    const FieldTapeLeaves fl = field_.prepare_tape(tape);
    PhiTapeLeaves pl;
    ad::NodeId log_rho = 0;
    if (use_bse) {
      if (cfg_.ablation == Ablation::kNoBseF)
        log_rho = tape.leaf(static_cast<std::uint32_t>(aux_offset_));
      else
        pl = prepare_phi_tape(tape, phi_offset_, phi_meta_);
    }

    RenderOptions opt;
    opt.n_samples = cfg_.samples_per_ray;
    const RayTapeNodes rn = emit_render_ray(tape, field_, fl, rs.ray, opt, rs.jitter.data());

    std::vector<std::pair<ad::NodeId, double>> seeds;
    seeds.emplace_back(rn.eikonal_sum, c_eik);
    pk.eik_sum = tape.value(rn.eikonal_sum);

    if (pre[j].hit && rn.hit_weight_value >= 1e-8) {
      const ad::NodeId diff = tape.addc(rn.depth, -rs.z);
      const ad::NodeId dterm = tape.mulc(tape.abs(diff), rs.w);
      seeds.emplace_back(dterm, c_depth);
      pk.depth_sum = tape.value(dterm);

      if (use_bse && pre[j].bse_valid) {
        const ViewRecord& view = data_.views[static_cast<std::size_t>(rs.view)];
        const Mat3& rot = view.camera.pose.rot;  // camera-to-world
        std::array<ad::NodeId, 3> n_cam{};
        for (int d = 0; d < 3; ++d) {
          const std::array<double, 3> row{rot(0, d), rot(1, d), rot(2, d)};
          n_cam[d] = tape.dotc(std::span<const ad::NodeId>(rn.normal.data(), 3),
                               std::span<const double>(row.data(), 3));
        }
        if (cfg_.ablation != Ablation::kNoBseF) {
          for (int q = 0; q < 4; ++q) {
            if (stage >= 3 && !pre[j].mask[q]) continue;
            const ad::NodeId f = emit_bse_forward(tape, pl, phi_meta_, n_cam, q);
            const ad::NodeId resid = tape.abs(tape.addc(f, -rs.b[q]));
            seeds.emplace_back(resid, c_bse);
            pk.bse_sum += tape.value(resid);
          }
        } else {
          // Gradient-supervision ablation: compare the rendered normal with
          // the photometric-stereo normal from the quadrant ratios, with a
          // learnable d/c ratio.
          const ad::NodeId inv_rho = tape.exp(tape.neg(log_rho));
          const ad::NodeId raw_x = tape.mulc(inv_rho, rs.ratio[0]);
          const ad::NodeId raw_y = tape.mulc(inv_rho, rs.ratio[1]);
          const ad::NodeId gx = tape.add(tape.mulc(raw_x, cr), tape.mulc(raw_y, -sr));
          const ad::NodeId gy = tape.add(tape.mulc(raw_x, sr), tape.mulc(raw_y, cr));
          const ad::NodeId cx = tape.addc(gx, 0.0);
          tape.addc(gy, 0.0);
          tape.constant(1.0);
          const ad::NodeId nn = tape.norm(cx, 1, 3);
          for (int d = 0; d < 3; ++d) {
            const ad::NodeId nps = tape.div(cx + static_cast<ad::NodeId>(d), nn);
            const ad::NodeId term = tape.abs(tape.sub(n_cam[d], nps));
            seeds.emplace_back(term, c_nrm);
            pk.bse_sum += tape.value(term);
          }
        }
      }
    }

    tape.backward_multi(seeds);
    pk.grads.clear();
    for (const auto& leaf : tape.leaves()) {
      const double g = tape.adjoint(leaf.node);
      if (g != 0.0) pk.grads.emplace_back(leaf.param_index, g);
    }
  });

  // Forward-model variance regularizer on its own small tape.
  double phi_reg_value = 0.0;
  std::vector<std::pair<std::uint32_t, double>> phi_reg_packet;
  if (use_bse && cfg_.ablation != Ablation::kNoBseF) {
    ad::Tape& tape = *tapes_[0];
    tape.reset();
    const PhiTapeLeaves pl = prepare_phi_tape(tape, phi_offset_, phi_meta_);
    const ad::NodeId reg = emit_regularize_phi(tape, pl);
    phi_reg_value = tape.value(reg);
    tape.backward(reg);
    for (const auto& leaf : tape.leaves()) {
      const double g = tape.adjoint(leaf.node);
      if (g != 0.0) phi_reg_packet.emplace_back(leaf.param_index, cfg_.lambda4 * g);
    }
  }

  // Deterministic accumulation in ray order.
  constexpr std::int64_t kFillChunk = 1 << 16;
  const std::int64_t nchunks =
      (static_cast<std::int64_t>(grads_.size()) + kFillChunk - 1) / kFillChunk;
  parallel_for(nchunks, [&](std::int64_t c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kFillChunk;
    const std::size_t hi = std::min(grads_.size(), lo + kFillChunk);
    std::fill(grads_.begin() + lo, grads_.begin() + hi, 0.0);
  });
  double depth_sum = 0.0, eik_sum = 0.0, bse_sum = 0.0;
  for (const Packet& pk : packets) {
    for (const auto& [idx, g] : pk.grads) grads_[idx] += g;
    depth_sum += pk.depth_sum;
    eik_sum += pk.eik_sum;
    bse_sum += pk.bse_sum;
  }
  for (const auto& [idx, g] : phi_reg_packet) grads_[idx] += g;

  StepLog log;
  log.step = beta;
  log.stage = stage;
  log.depth_term = c_depth * depth_sum;
  log.eikonal_term = c_eik * eik_sum;
  log.bse_term = (cfg_.ablation == Ablation::kNoBseF ? c_nrm : c_bse) * bse_sum;
  log.phi_reg_term = cfg_.lambda4 * phi_reg_value;
  log.total = log.depth_term + log.eikonal_term + log.bse_term + log.phi_reg_term;
  log.sharpness = field_.sharpness(params_);
  log.hit_rays = hit_rays;
  log.bse_rays = bse_rays;
  log.mask_fill = (stage >= 3 && bse_rays > 0)
                      ? static_cast<double>(mask_on) / (4.0 * bse_rays)
                      : 1.0;

  auto check = [&](double v, const char* name) {
    if (!std::isfinite(v))
      throw std::runtime_error("train: non-finite " + std::string(name) + " loss at step " +
                               std::to_string(beta));
  };
  check(log.depth_term, "depth");
  check(log.eikonal_term, "eikonal");
  check(log.bse_term, "bse");
  check(log.phi_reg_term, "phi_reg");

  // Empty-mask bookkeeping: warn once if a whole epoch of stage-3 batches
  // masks out everything.
  const std::int64_t pixels = static_cast<std::int64_t>(data_.views.size()) * data_.width *
                              data_.height;
  const int epoch_steps =
      static_cast<int>(std::max<std::int64_t>(1, pixels / std::max(cfg_.rays_per_batch, 1)));
  if (stage >= 3 && bse_rays > 0 && mask_on == 0) {
    if (++zero_mask_streak_ >= epoch_steps && !warned_empty_mask_) {
      std::cerr << "warning: shadow mask empty for a full epoch at step " << beta << "\n";
      warned_empty_mask_ = true;
    }
  } else {
    zero_mask_streak_ = 0;
  }

  adam_step(adam_, params_, grads_);
  return log;
}

TrainResult Trainer::run(std::ostream* jsonl) {
  TrainResult result;
  result.field_config = field_.config();
  result.logs.reserve(static_cast<std::size_t>(cfg_.t3));
  for (int beta = 1; beta <= cfg_.t3; ++beta) {
    StepLog log = step(beta);
    if (jsonl) {
      json j = {{"step", log.step},
                {"stage", log.stage},
                {"total", log.total},
                {"depth", log.depth_term},
                {"eikonal", log.eikonal_term},
                {"bse", log.bse_term},
                {"phi_reg", log.phi_reg_term},
                {"mask_fill", log.mask_fill},
                {"sharpness", log.sharpness},
                {"hit_rays", log.hit_rays},
                {"bse_rays", log.bse_rays}};
      if (log.step % 100 == 0) {
        const ForwardModelParams phi = current_phi();
        j["phi"] = {{"c", phi.c}, {"d", phi.d}, {"e", phi.e}, {"p", phi.p}};
      }
      (*jsonl) << j.dump() << "\n";
    }
    result.logs.push_back(log);
  }
  if (field_.clamp_events() > 0 && !warned_clamp_) {
    std::cerr << "warning: " << field_.clamp_events()
              << " field queries were clamped to the unit cube\n";
    warned_clamp_ = true;
  }
  result.params = params_;
  result.phi = current_phi();
  return result;
}

}  // namespace nfsem
