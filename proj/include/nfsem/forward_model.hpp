#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>

#include "nfsem/geometry.hpp"
#include "nfsem/tape.hpp"

namespace nfsem {

inline constexpr int kQuadrants = 4;  // A, B, C, D

// Emission magnification term R(theta): the learnable fourth-order
// polynomial, or the classical secant used by plain photometric stereo.
enum class EmissionModel { kPolynomial, kSecant };

std::string emission_model_name(EmissionModel m);
EmissionModel emission_model_from_name(const std::string& name);

// The 16 learnable detector parameters plus fixed mounting metadata.
// d is kept positive through an exponential parameterization of its
// optimizer slot; `shared_quadrants` ties all quadrants to slot 0.
struct ForwardModelParams {
  std::array<double, 4> c{30.0, 30.0, 30.0, 30.0};  // cosine-term gain
  std::array<double, 4> d{25.0, 25.0, 25.0, 25.0};  // sine-term gain, > 0
  std::array<double, 4> e{40.0, 40.0, 40.0, 40.0};  // brightness offset
  std::array<double, 4> p{0.0, 0.0, 0.0, 0.0};      // polynomial coefficients
  double detector_rotation = 0.0;                   // detector frame vs image axes
  EmissionModel emission = EmissionModel::kPolynomial;
  bool shared_quadrants = false;

  // A sits at detector_rotation, B opposite, C at +90 degrees, D at 270.
  double quadrant_azimuth(int q) const {
    static constexpr double off[4] = {0.0, kPi, kPi / 2.0, 3.0 * kPi / 2.0};
    return detector_rotation + off[q];
  }
  double cq(int q) const { return c[shared_quadrants ? 0 : q]; }
  double dq(int q) const { return d[shared_quadrants ? 0 : q]; }
  double eq(int q) const { return e[shared_quadrants ? 0 : q]; }
};

// Incidence/azimuth decomposition of a front-facing beam-frame normal
// (beam along -z, so n.z > 0 faces the detector).
struct NormalAngles {
  double theta = 0.0;  // [0, pi/2)
  double phi = 0.0;    // (-pi, pi]
};

// Fails (nullopt) when the normal faces away from the beam.
std::optional<NormalAngles> normal_to_angles(const Vec3& n_beam);
Vec3 angles_to_normal(const NormalAngles& a);

double emission_r(const ForwardModelParams& phi, double theta);

// F_i(n; phi) = R(theta) [d_i cos(phi_i - phi_n) sin(theta) + c_i cos(theta)] + e_i.
double bse_forward(const ForwardModelParams& phi, const Vec3& n_beam, int quadrant);
double bse_forward_angles(const ForwardModelParams& phi, double theta, double phi_n, int quadrant);

// 1 iff |f_pred - b_obs| < alpha d_i (strict).
bool shadow_mask(double f_pred, double b_obs, int quadrant, const ForwardModelParams& phi,
                 double alpha);

// R_phi = Var(c) + Var(d) + Var(e), population variance over quadrants.
double regularize_phi(const ForwardModelParams& phi);

// --- optimizer packing -----------------------------------------------------
// Flat slot order: [c0..c3, log d0..log d3, e0..e3, p0..p3].
inline constexpr std::size_t kPhiParamCount = 16;

void pack_phi(const ForwardModelParams& phi, std::span<double> out);
// Rebuilds values from slots; emission/shared/rotation metadata is taken
// from `meta`. Under shared quadrants slot 0 of each group is broadcast.
ForwardModelParams unpack_phi(std::span<const double> slots, const ForwardModelParams& meta);

// --- tape path --------------------------------------------------------------
struct PhiTapeLeaves {
  std::array<ad::NodeId, 4> c{}, d{}, e{}, p{};  // d already exponentiated
};

// phi_offset: index of slot c0 inside the global parameter vector.
PhiTapeLeaves prepare_phi_tape(ad::Tape& tape, std::size_t phi_offset,
                               const ForwardModelParams& meta);

// Emits F_i for a beam-frame normal given as three nodes. The angles are
// derived on tape, so gradients flow into both the normal and phi.
ad::NodeId emit_bse_forward(ad::Tape& tape, const PhiTapeLeaves& leaves,
                            const ForwardModelParams& meta,
                            const std::array<ad::NodeId, 3>& n_beam, int quadrant);

ad::NodeId emit_regularize_phi(ad::Tape& tape, const PhiTapeLeaves& leaves);

}  // namespace nfsem
