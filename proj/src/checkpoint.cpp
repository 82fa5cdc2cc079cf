#include "nfsem/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace nfsem {

using nlohmann::json;

void save_field_checkpoint(const std::string& path, const FieldConfig& cfg,
                           std::span<const double> params) {
  const FieldLayout layout(cfg);
  if (params.size() < layout.count)
    throw std::invalid_argument("save_field_checkpoint: parameter vector too short");
  json header = {{"magic", "nfsem-field"},
                 {"levels", cfg.levels},
                 {"features_per_level", cfg.features_per_level},
                 {"base_resolution", cfg.base_resolution},
                 {"growth_factor", cfg.growth_factor},
                 {"table_log2", cfg.table_log2},
                 {"hidden", cfg.hidden},
                 {"bounds", {0.0, 0.0, 0.0, 1.0, 1.0, 1.0}},
                 {"scene_scale", cfg.scene_scale},
                 {"sharpness", std::exp(params[layout.sharpness_offset])},
                 {"count", layout.count}};
  const std::string line = header.dump() + "\n";
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write " + path);
  std::fwrite(line.data(), 1, line.size(), f);
  std::vector<float> blob(layout.count);
  for (std::size_t i = 0; i < layout.count; ++i) blob[i] = static_cast<float>(params[i]);
  std::fwrite(blob.data(), sizeof(float), blob.size(), f);
  std::fclose(f);
}

FieldCheckpoint load_field_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string line;
  int ch;
  while ((ch = std::fgetc(f)) != EOF && ch != '\n') line.push_back(static_cast<char>(ch));
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("magic", "") != "nfsem-field") {
    std::fclose(f);
    throw std::runtime_error("not a field checkpoint: " + path);
  }
  FieldCheckpoint ckpt;
  ckpt.config.levels = header.at("levels").get<int>();
  ckpt.config.features_per_level = header.at("features_per_level").get<int>();
  ckpt.config.base_resolution = header.at("base_resolution").get<int>();
  ckpt.config.growth_factor = header.at("growth_factor").get<double>();
  ckpt.config.table_log2 = header.at("table_log2").get<int>();
  ckpt.config.hidden = header.at("hidden").get<int>();
  ckpt.config.scene_scale = header.at("scene_scale").get<double>();
  const std::size_t count = header.at("count").get<std::size_t>();
  const FieldLayout layout(ckpt.config);
  if (count != layout.count) {
    std::fclose(f);
    throw std::runtime_error("field checkpoint: inconsistent parameter count");
  }
  std::vector<float> blob(count);
  const std::size_t got = std::fread(blob.data(), sizeof(float), count, f);
  std::fclose(f);
  if (got != count) throw std::runtime_error("field checkpoint: truncated blob");
  ckpt.params.resize(count);
  for (std::size_t i = 0; i < count; ++i) ckpt.params[i] = blob[i];
  return ckpt;
}

void save_phi_checkpoint(const std::string& path, const ForwardModelParams& phi) {
  json j = {{"c", phi.c},
            {"d", phi.d},
            {"e", phi.e},
            {"p", phi.p},
            {"detector_rotation", phi.detector_rotation},
            {"emission", emission_model_name(phi.emission)},
            {"shared_quadrants", phi.shared_quadrants}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

ForwardModelParams load_phi_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j = json::parse(in);
  ForwardModelParams phi;
  for (int q = 0; q < 4; ++q) {
    phi.c[q] = j.at("c").at(q).get<double>();
    phi.d[q] = j.at("d").at(q).get<double>();
    phi.e[q] = j.at("e").at(q).get<double>();
    phi.p[q] = j.at("p").at(q).get<double>();
  }
  phi.detector_rotation = j.value("detector_rotation", 0.0);
  phi.emission = emission_model_from_name(j.value("emission", "polynomial"));
  phi.shared_quadrants = j.value("shared_quadrants", false);
  return phi;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint64_t hash = 1469598103934665603ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 1099511628211ull;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
  return out;
}

}  // namespace nfsem
