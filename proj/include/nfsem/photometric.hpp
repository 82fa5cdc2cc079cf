#pragma once

#include <cstdint>
#include <optional>

#include "nfsem/image.hpp"

namespace nfsem {

struct PsGradients {
  FloatMap gx;               // depth gradient along image x
  FloatMap gy;               // depth gradient along image y
  Image<std::uint8_t> valid; // 1 where both quadrant sums were positive
};

// Classical quadrant-ratio gradients: raw = (bA-bB)/(bA+bB) * (c/d) along
// the detector axes, then rotated into image axes (the detector x-axis sits
// at detector_rotation in the image frame). Pixels with a non-positive
// denominator are flagged invalid.
PsGradients ps_gradients(const FloatMap& b_a, const FloatMap& b_b, const FloatMap& b_c,
                         const FloatMap& b_d, double d_over_c, double detector_rotation);

// Replaces invalid pixels by their nearest valid neighbor (multi-source BFS,
// ties resolved in scan order).
void infill_nearest(FloatMap& map, const Image<std::uint8_t>& valid);

struct IntegrationResult {
  FloatMap height;   // zero-mean over the valid mask
  int iterations = 0;
  double residual = 0.0;
};

// Least-squares integration of a gradient field with forward differences:
// min sum (Dx z - gx)^2 + (Dy z - gy)^2 over valid pixels, solved by
// conjugate gradients on the normal equations (a masked Poisson system).
// Throws when CG fails to reach rel_tol within 10*H*W iterations.
IntegrationResult integrate_gradients(const FloatMap& gx, const FloatMap& gy,
                                      const Image<std::uint8_t>& valid, double rel_tol = 1e-8);

struct PsReconstruction {
  FloatMap depth;     // aligned to the coarse model's mean
  PsGradients grads;
  int cg_iterations = 0;
};

// Full single-view baseline: gradients -> infill -> integration. pixel_size
// converts slopes into per-pixel differences (orthographic views). The
// result is mean-aligned to the coarse depth; when rescale_to_coarse is set
// the height range is also matched to the coarse model's range (the
// protocol for an uncalibrated d/c ratio).
PsReconstruction ps_reconstruct(const FloatMap& b_a, const FloatMap& b_b, const FloatMap& b_c,
                                const FloatMap& b_d, const FloatMap& coarse_depth,
                                const Image<std::uint8_t>& foreground, double d_over_c,
                                double detector_rotation, double pixel_size,
                                bool rescale_to_coarse);

}  // namespace nfsem
