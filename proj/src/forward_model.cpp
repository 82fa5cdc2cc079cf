#include "nfsem/forward_model.hpp"

#include <cmath>
#include <stdexcept>

namespace nfsem {

std::string emission_model_name(EmissionModel m) {
  return m == EmissionModel::kPolynomial ? "polynomial" : "secant";
}

EmissionModel emission_model_from_name(const std::string& name) {
  if (name == "polynomial") return EmissionModel::kPolynomial;
  if (name == "secant") return EmissionModel::kSecant;
  throw std::invalid_argument("unknown emission model: " + name);
}

std::optional<NormalAngles> normal_to_angles(const Vec3& n) {
  if (!(n.z > 0.0)) return std::nullopt;
  NormalAngles a;
  a.theta = std::acos(std::fmin(n.z, 1.0));
  a.phi = (n.x == 0.0 && n.y == 0.0) ? 0.0 : std::atan2(n.y, n.x);
  return a;
}

Vec3 angles_to_normal(const NormalAngles& a) {
  const double st = std::sin(a.theta);
  return {st * std::cos(a.phi), st * std::sin(a.phi), std::cos(a.theta)};
}

double emission_r(const ForwardModelParams& phi, double theta) {
  if (phi.emission == EmissionModel::kSecant) return 1.0 / std::cos(theta);
  const double t2 = theta * theta;
  return 1.0 + phi.p[0] * theta + phi.p[1] * t2 + phi.p[2] * t2 * theta + phi.p[3] * t2 * t2;
}

double bse_forward_angles(const ForwardModelParams& phi, double theta, double phi_n, int quadrant) {
  const double dphi = phi.quadrant_azimuth(quadrant) - phi_n;
  const double bracket = phi.dq(quadrant) * std::cos(dphi) * std::sin(theta) +
                         phi.cq(quadrant) * std::cos(theta);
  return emission_r(phi, theta) * bracket + phi.eq(quadrant);
}

double bse_forward(const ForwardModelParams& phi, const Vec3& n, int quadrant) {
  const auto angles = normal_to_angles(n);
  if (!angles) throw std::domain_error("bse_forward: normal faces away from the beam");
  return bse_forward_angles(phi, angles->theta, angles->phi, quadrant);
}

bool shadow_mask(double f_pred, double b_obs, int quadrant, const ForwardModelParams& phi,
                 double alpha) {
  return std::fabs(f_pred - b_obs) < alpha * phi.dq(quadrant);
}

namespace {
double population_variance(const std::array<double, 4>& v) {
  const double mean = (v[0] + v[1] + v[2] + v[3]) / 4.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / 4.0;
}
}  // namespace

double regularize_phi(const ForwardModelParams& phi) {
  if (phi.shared_quadrants) return 0.0;
  return population_variance(phi.c) + population_variance(phi.d) + population_variance(phi.e);
}

void pack_phi(const ForwardModelParams& phi, std::span<double> out) {
  if (out.size() < kPhiParamCount) throw std::invalid_argument("pack_phi: span too small");
  for (int q = 0; q < 4; ++q) {
    out[q] = phi.c[q];
    out[4 + q] = std::log(phi.d[q]);
    out[8 + q] = phi.e[q];
    out[12 + q] = phi.p[q];
  }
}

ForwardModelParams unpack_phi(std::span<const double> slots, const ForwardModelParams& meta) {
  ForwardModelParams phi = meta;
  for (int q = 0; q < 4; ++q) {
    const int src = meta.shared_quadrants ? 0 : q;
    phi.c[q] = slots[src];
    phi.d[q] = std::exp(slots[4 + src]);
    phi.e[q] = slots[8 + src];
    phi.p[q] = slots[12 + q];
  }
  if (meta.emission == EmissionModel::kSecant) phi.p = {0.0, 0.0, 0.0, 0.0};
  return phi;
}

PhiTapeLeaves prepare_phi_tape(ad::Tape& tape, std::size_t phi_offset,
                               const ForwardModelParams& meta) {
  PhiTapeLeaves leaves;
  for (int q = 0; q < 4; ++q) {
    const int src = meta.shared_quadrants ? 0 : q;
    leaves.c[q] = tape.leaf(static_cast<std::uint32_t>(phi_offset + src));
    leaves.d[q] = tape.exp(tape.leaf(static_cast<std::uint32_t>(phi_offset + 4 + src)));
    leaves.e[q] = tape.leaf(static_cast<std::uint32_t>(phi_offset + 8 + src));
    leaves.p[q] = tape.leaf(static_cast<std::uint32_t>(phi_offset + 12 + q));
  }
  return leaves;
}

ad::NodeId emit_bse_forward(ad::Tape& tape, const PhiTapeLeaves& leaves,
                            const ForwardModelParams& meta,
                            const std::array<ad::NodeId, 3>& n, int quadrant) {
  const ad::NodeId theta = tape.arccos(n[2]);
  const ad::NodeId phi_n = tape.atan2(n[1], n[0]);
  const ad::NodeId sin_t = tape.sin(theta);
  const ad::NodeId cos_t = tape.cos(theta);
  const ad::NodeId dphi = tape.addc(tape.neg(phi_n), meta.quadrant_azimuth(quadrant));
  const ad::NodeId cos_dphi = tape.cos(dphi);

  ad::NodeId r;
  if (meta.emission == EmissionModel::kSecant) {
    r = tape.powc(cos_t, -1.0);
  } else {
    const ad::NodeId t2 = tape.powc(theta, 2.0);
    const ad::NodeId t3 = tape.powc(theta, 3.0);
    const ad::NodeId t4 = tape.powc(theta, 4.0);
    ad::NodeId acc = tape.addc(tape.mul(leaves.p[0], theta), 1.0);
    acc = tape.add(acc, tape.mul(leaves.p[1], t2));
    acc = tape.add(acc, tape.mul(leaves.p[2], t3));
    r = tape.add(acc, tape.mul(leaves.p[3], t4));
  }

  const ad::NodeId sine_term = tape.mul(tape.mul(leaves.d[quadrant], cos_dphi), sin_t);
  const ad::NodeId cos_term = tape.mul(leaves.c[quadrant], cos_t);
  const ad::NodeId bracket = tape.add(sine_term, cos_term);
  return tape.add(tape.mul(r, bracket), leaves.e[quadrant]);
}

ad::NodeId emit_regularize_phi(ad::Tape& tape, const PhiTapeLeaves& leaves) {
  auto group_var = [&](const std::array<ad::NodeId, 4>& g) {
    ad::NodeId mean = tape.mulc(tape.add(tape.add(g[0], g[1]), tape.add(g[2], g[3])), 0.25);
    ad::NodeId acc = 0;
    for (int q = 0; q < 4; ++q) {
      const ad::NodeId dev = tape.sub(g[q], mean);
      const ad::NodeId sq = tape.mul(dev, dev);
      acc = q == 0 ? sq : tape.add(acc, sq);
    }
    return tape.mulc(acc, 0.25);
  };
  return tape.add(tape.add(group_var(leaves.c), group_var(leaves.d)), group_var(leaves.e));
}

}  // namespace nfsem
