#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "nfsem/camera.hpp"
#include "nfsem/forward_model.hpp"
#include "nfsem/image.hpp"
#include "nfsem/simulator.hpp"

namespace nfsem {

// One loaded viewpoint: pose, prior maps, the four quadrant images and any
// embedded ground truth. BSE images are held as float intensities in 0..255.
struct ViewRecord {
  Camera camera;
  FloatMap depth;       // coarse prior
  FloatMap confidence;
  std::array<FloatMap, 4> bse;
  std::optional<FloatMap> gt_depth;
  std::optional<FloatMap> gt_normal;            // 3 channels, camera frame
  std::optional<Image<std::uint8_t>> gt_mask;
  std::optional<std::array<FloatMap, 4>> gt_shadow;
};

struct Dataset {
  int width = 0;
  int height = 0;
  double scene_scale = 20.0;
  std::string scene_name;                       // empty for non-simulated data
  std::optional<double> noise_sigma;
  std::optional<ForwardModelParams> phi_gt;
  std::vector<ViewRecord> views;

  bool has_ground_truth() const;
};

// Writes manifest.json plus per-view maps/images under dir. Returns the
// manifest path.
std::string write_dataset(const std::string& dir, const SimulatedDataset& sim);

// Validates the manifest (version, schema with unknown-field rejection,
// orthonormal poses, file presence, dimensions) and loads everything.
Dataset load_dataset(const std::string& dir);

}  // namespace nfsem
