#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "nfsem/geometry.hpp"
#include "nfsem/rng.hpp"
#include "nfsem/tape.hpp"

namespace nfsem {

// Geometry network dimensions. The scene is normalized into the unit cube;
// scene_scale converts scene units to micrometers.
struct FieldConfig {
  int levels = 16;
  int features_per_level = 2;
  int base_resolution = 16;
  double growth_factor = 1.382;
  int table_log2 = 16;
  int hidden = 64;
  double scene_scale = 20.0;  // micrometers per scene unit
  double init_sharpness = 30.0;
  double init_radius = 0.5;

  int table_size() const { return 1 << table_log2; }
  int encoded_dim() const { return levels * features_per_level; }
  int mlp_input_dim() const { return encoded_dim() + 3; }
  int level_resolution(int level) const;
};

// Flat parameter layout: [hash tables | W1 | b1 | W2 | b2 | log sharpness].
struct FieldLayout {
  std::size_t hash_offset = 0;
  std::size_t hash_count = 0;
  std::size_t w1_offset = 0;
  std::size_t b1_offset = 0;
  std::size_t w2_offset = 0;
  std::size_t b2_offset = 0;
  std::size_t sharpness_offset = 0;
  std::size_t count = 0;

  explicit FieldLayout(const FieldConfig& cfg);
  FieldLayout() = default;
};

// Ids of the recurring tape leaves, created once per tape before any sample
// is emitted so their node ids form contiguous blocks.
struct FieldTapeLeaves {
  ad::NodeId w1_base = 0;
  ad::NodeId b1_base = 0;
  ad::NodeId w2_base = 0;
  ad::NodeId b2 = 0;
  ad::NodeId log_sharpness = 0;
  ad::NodeId sharpness = 0;  // exp(log_sharpness)
};

struct SdfSampleNodes {
  ad::NodeId sdf = 0;
  std::array<ad::NodeId, 3> gradient{0, 0, 0};
};

// Hash-encoded SDF network. Stateless over a flat parameter vector, so
// concurrent read-only queries are safe.
class SdfField {
 public:
  explicit SdfField(const FieldConfig& cfg = {});

  const FieldConfig& config() const { return cfg_; }
  const FieldLayout& layout() const { return layout_; }
  std::size_t parameter_count() const { return layout_.count; }

  // Feature tables uniform in [-1e-4, 1e-4]; MLP arranged so the initial
  // field approximates a sphere of radius init_radius centered in the cube.
  void init_parameters(std::span<double> params, Rng& rng) const;

  double sharpness(std::span<const double> params) const;

  // --- value path (no derivative records) ---
  double sdf(const Vec3& x, std::span<const double> params) const;
  Vec3 sdf_gradient(const Vec3& x, std::span<const double> params) const;
  void sdf_with_gradient(const Vec3& x, std::span<const double> params, double& s, Vec3& grad) const;

  // --- tape path ---
  FieldTapeLeaves prepare_tape(ad::Tape& tape) const;
  SdfSampleNodes emit_sample(ad::Tape& tape, const FieldTapeLeaves& leaves, const Vec3& x) const;

  // Out-of-bounds queries are clamped; the count is kept for diagnostics.
  std::uint64_t clamp_events() const { return clamp_events_.load(std::memory_order_relaxed); }

 private:
  struct CornerSet {
    std::array<std::uint32_t, 8> index;  // global parameter indices of feature 0
    std::array<double, 8> weight;
    std::array<double, 8> dwx, dwy, dwz;
  };
  CornerSet level_corners(int level, const Vec3& x) const;
  Vec3 clamp_to_bounds(const Vec3& x) const;
  void sdf_with_gradient_impl(const Vec3& x, std::span<const double> params, double& s, Vec3* grad,
                              bool want_grad) const;

  FieldConfig cfg_;
  FieldLayout layout_;
  std::vector<int> resolutions_;
  std::vector<bool> dense_;
  mutable std::atomic<std::uint64_t> clamp_events_{0};
};

}  // namespace nfsem
