#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nfsem/field.hpp"
#include "nfsem/forward_model.hpp"

namespace nfsem {

// Field checkpoint: one JSON header line (dimensions, bounds, scene_scale,
// sharpness) followed by the parameters as little-endian 32-bit floats.
void save_field_checkpoint(const std::string& path, const FieldConfig& cfg,
                           std::span<const double> params);

struct FieldCheckpoint {
  FieldConfig config;
  std::vector<double> params;
};
FieldCheckpoint load_field_checkpoint(const std::string& path);

// Forward-model checkpoint: plain JSON with named fields.
void save_phi_checkpoint(const std::string& path, const ForwardModelParams& phi);
ForwardModelParams load_phi_checkpoint(const std::string& path);

// FNV-1a over a file's bytes; used for reproducibility checks.
std::string file_digest(const std::string& path);

}  // namespace nfsem
