#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "nfsem/dataset.hpp"
#include "nfsem/field.hpp"
#include "nfsem/forward_model.hpp"
#include "nfsem/image.hpp"

namespace nfsem {

// Rendered per-view maps from a trained field: depth (ray parameter),
// camera-frame normals and the hit mask.
struct RenderedMaps {
  FloatMap depth;
  FloatMap normal;  // 3 channels
  Image<std::uint8_t> hit;
};

RenderedMaps render_view_maps(const SdfField& field, std::span<const double> params,
                              const Camera& cam, int n_samples);

// Mean absolute depth error in micrometers over ground-truth foreground
// pixels of all views. Foreground pixels the prediction misses count with
// the far bound of their ray (depth) and 90 degrees (normal).
double eval_depth(const std::vector<const FloatMap*>& pred,
                  const std::vector<const FloatMap*>& gt,
                  const std::vector<const Image<std::uint8_t>*>& masks, double scene_scale);

double eval_normal(const std::vector<const FloatMap*>& pred,
                   const std::vector<const FloatMap*>& gt,
                   const std::vector<const Image<std::uint8_t>*>& masks);

// Mean intensity gap between two forward models over theta uniformly
// sampled in the valid supervision interval [0, 60] degrees, each model
// evaluated under its own emission mode at its quadrant azimuth.
double eval_bse_model(const ForwardModelParams& estimated, const ForwardModelParams& ground_truth,
                      int t_samples = 64);

// Shadow accuracy score (percent). The estimated shadow map is
// |F(n_hat; phi_hat) - b|; per view and quadrant the L1 gap is normalized
// by the total mass of both maps, terms with zero denominator are skipped.
double eval_shadow(const ForwardModelParams& phi_hat,
                   const std::vector<const FloatMap*>& normals,
                   const std::vector<const Image<std::uint8_t>*>& hit_masks,
                   const std::vector<std::array<const FloatMap*, 4>>& bse,
                   const std::vector<std::array<const FloatMap*, 4>>& gt_shadow,
                   const std::vector<const Image<std::uint8_t>*>& fg_masks);

// Camera-frame normals from a depth map by central differences (the coarse
// input row of the evaluation protocol).
FloatMap depth_to_normals(const FloatMap& depth, const Image<std::uint8_t>& mask,
                          double pixel_size);

struct ViewRow {
  int view = 0;
  double e_depth = 0.0;    // micrometers
  double e_normal = 0.0;   // degrees
  double coverage = 1.0;   // hit fraction of the foreground
};

struct EvalReport {
  double e_depth = 0.0;
  double e_normal = 0.0;
  std::optional<double> e_bse;     // needs ground-truth phi
  std::optional<double> s_shadow;  // needs ground-truth shadow maps
  double coarse_e_depth = 0.0;
  double coarse_e_normal = 0.0;
  double coverage = 1.0;
  std::vector<ViewRow> views;
  std::vector<ViewRow> coarse_views;

  std::string to_json() const;
};

// Full evaluation protocol over a dataset with embedded ground truth:
// renders every view from the field, scores the reconstruction and the
// coarse input row, and adds the forward-model and shadow scores when the
// dataset carries their ground truth.
EvalReport evaluate(const Dataset& data, const SdfField& field, std::span<const double> params,
                    const ForwardModelParams& phi_hat, int n_samples);

void write_eval_report(const std::string& path, const EvalReport& report);

}  // namespace nfsem
