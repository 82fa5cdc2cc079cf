#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nfsem/camera.hpp"
#include "nfsem/image.hpp"
#include "nfsem/scenes.hpp"

namespace nfsem {

struct SimulatorOptions {
  int n_views = 9;
  int width = 128;
  int height = 96;
  double pixel_size = 0.0;  // 0 = auto: 1.5 / height
  double camera_distance = 1.5;
  bool shadows = true;
  int light_samples = 64;
  double noise_sigma = 0.9142;
  double blur_radius = 3.0;   // coarse-depth Gaussian blur (pixels)
  double noise_amp = 0.02;    // coarse-depth noise, fraction of height range
  double confidence = 0.2;
  std::uint64_t seed = 0;
  std::string phi_preset;     // empty = the scene's own ground truth
};

struct SimulatedView {
  Camera camera;
  FloatMap gt_depth;               // ray parameter at the surface, 0 at background
  FloatMap gt_normal;              // camera-frame unit normals, 3 channels
  Image<std::uint8_t> foreground;
  std::array<FloatMap, 4> shadow;  // per-quadrant shadow intensity (psi-bar)
  std::array<FloatMap, 4> bse;     // simulated images, float, pre-quantization
  FloatMap coarse_depth;
  FloatMap confidence;
};

struct SimulatedDataset {
  Scene scene;
  SimulatorOptions options;
  std::vector<SimulatedView> views;
};

// Sphere-traced depth, analytic normals and the foreground mask for one view.
void render_ground_truth(const Scene& scene, const Camera& cam, FloatMap& depth, FloatMap& normal,
                         Image<std::uint8_t>& foreground);

// Monte-Carlo area-light occlusion for the four quadrant lights (annular
// sectors in the camera frame, inner radius 2x / outer 6x the scene extent,
// 10x above the scene center along the beam axis). psi = occluded fraction
// times the shadow-free intensity.
void render_shadows(const Scene& scene, const Camera& cam, const FloatMap& gt_depth,
                    const FloatMap& gt_normal, const Image<std::uint8_t>& foreground,
                    const ForwardModelParams& phi_gt, int light_samples, std::uint64_t seed,
                    std::array<FloatMap, 4>& psi);

// b' = F(n; phi) - psi + N(0, sigma^2); background pixels carry e_i plus the
// same noise. Values are float intensities; quantization happens on write.
void synthesize_bse(const FloatMap& gt_normal, const Image<std::uint8_t>& foreground,
                    const std::array<FloatMap, 4>& psi, const ForwardModelParams& phi_gt,
                    double sigma, std::uint64_t seed, std::array<FloatMap, 4>& bse);

// Foreground-masked Gaussian blur plus band-limited noise; the confidence
// map is a constant on the foreground.
void degrade_depth(const FloatMap& gt_depth, const Image<std::uint8_t>& foreground,
                   double blur_radius, double noise_amp, double confidence, std::uint64_t seed,
                   FloatMap& coarse, FloatMap& conf);

SimulatedDataset simulate_dataset(const Scene& scene, const SimulatorOptions& options);

}  // namespace nfsem
