#pragma once

#include <array>
#include <span>

#include "nfsem/field.hpp"
#include "nfsem/geometry.hpp"

namespace nfsem {

struct RenderOptions {
  int n_samples = 1024;
  double hit_threshold = 0.5;
  // Value path only: skip the gradient evaluation for samples whose
  // rendering weight is below this (0 evaluates everything).
  double weight_cutoff = 0.0;
};

struct RenderResult {
  double depth = 0.0;
  Vec3 normal;
  double hit_weight = 0.0;
  bool hit = false;
};

// Volume rendering along one ray. Weights follow the front-facing sigmoid
// scheme: alpha_k = max((sig(k s_k) - sig(k s_{k+1})) / sig(k s_k), 0),
// w_k = alpha_k prod_{j<k} (1 - alpha_j). The k-th interval uses the k-th
// stratified sample position. jitter may be null (midpoint sampling) or
// hold n_samples values in [0, 1).
RenderResult render_ray(const SdfField& field, std::span<const double> params, const Ray& ray,
                        const RenderOptions& opt, const double* jitter = nullptr);

struct RayTapeNodes {
  bool hit = false;
  double hit_weight_value = 0.0;
  ad::NodeId depth = 0;
  ad::NodeId hit_weight = 0;
  std::array<ad::NodeId, 3> normal{0, 0, 0};  // world frame, unit length when hit
  ad::NodeId eikonal_sum = 0;                 // sum over samples of (|grad s| - 1)^2
  int n_samples = 0;
};

// Tape twin of render_ray; depth/normal nodes are only emitted when the ray
// hits (their gradients are undefined otherwise). The eikonal sum is always
// emitted and covers every sample on the ray.
RayTapeNodes emit_render_ray(ad::Tape& tape, const SdfField& field, const FieldTapeLeaves& leaves,
                             const Ray& ray, const RenderOptions& opt,
                             const double* jitter = nullptr);

}  // namespace nfsem
