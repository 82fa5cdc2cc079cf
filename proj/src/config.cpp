#include "nfsem/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nfsem {

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoBseF: return "no_bse_f";
    case Ablation::kNoPolyR: return "no_poly_r";
    case Ablation::kNo4qVar: return "no_4q_var";
    case Ablation::kNoSMask: return "no_s_mask";
  }
  return "none";
}

Ablation ablation_from_name(const std::string& name) {
  if (name == "none") return Ablation::kNone;
  if (name == "no_bse_f") return Ablation::kNoBseF;
  if (name == "no_poly_r") return Ablation::kNoPolyR;
  if (name == "no_4q_var") return Ablation::kNo4qVar;
  if (name == "no_s_mask") return Ablation::kNoSMask;
  throw std::invalid_argument("unknown ablation: " + name);
}

void TrainConfig::validate() const {
  if (!(0 < t1 && t1 < t2 && t2 < t3))
    throw std::invalid_argument("config: stage boundaries must satisfy 0 < t1 < t2 < t3");
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda4 < 0)
    throw std::invalid_argument("config: loss weights must be non-negative");
  if (alpha <= 0) throw std::invalid_argument("config: alpha must be positive");
  if (rays_per_batch < 1 || samples_per_ray < 2)
    throw std::invalid_argument("config: rays_per_batch >= 1 and samples_per_ray >= 2 required");
  if (learning_rate <= 0) throw std::invalid_argument("config: learning_rate must be positive");
}

std::map<std::string, std::string> parse_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

TrainConfig parse_train_config(const std::string& path, const TrainConfig& defaults) {
  TrainConfig cfg = defaults;
  for (const auto& [key, value] : parse_key_values(path)) {
    if (key == "lambda1") {
      cfg.lambda1 = std::stod(value);
      cfg.lambda1_explicit = true;
    } else if (key == "lambda2")
      cfg.lambda2 = std::stod(value);
    else if (key == "lambda3")
      cfg.lambda3 = std::stod(value);
    else if (key == "lambda4")
      cfg.lambda4 = std::stod(value);
    else if (key == "t1")
      cfg.t1 = std::stoi(value);
    else if (key == "t2")
      cfg.t2 = std::stoi(value);
    else if (key == "t3")
      cfg.t3 = std::stoi(value);
    else if (key == "alpha")
      cfg.alpha = std::stod(value);
    else if (key == "rays_per_batch")
      cfg.rays_per_batch = std::stoi(value);
    else if (key == "samples_per_ray")
      cfg.samples_per_ray = std::stoi(value);
    else if (key == "tilt_cutoff_deg")
      cfg.tilt_cutoff_deg = std::stod(value);
    else if (key == "learning_rate")
      cfg.learning_rate = std::stod(value);
    else if (key == "seed")
      cfg.seed = std::stoull(value);
    else if (key == "ablation")
      cfg.ablation = ablation_from_name(value);
    else
      throw std::runtime_error("config: unknown key \"" + key + "\"");
  }
  cfg.validate();
  return cfg;
}

std::string train_config_to_string(const TrainConfig& cfg) {
  std::ostringstream out;
  out << "lambda1 = " << cfg.lambda1 << "\n"
      << "lambda2 = " << cfg.lambda2 << "\n"
      << "lambda3 = " << cfg.lambda3 << "\n"
      << "lambda4 = " << cfg.lambda4 << "\n"
      << "t1 = " << cfg.t1 << "\n"
      << "t2 = " << cfg.t2 << "\n"
      << "t3 = " << cfg.t3 << "\n"
      << "alpha = " << cfg.alpha << "\n"
      << "rays_per_batch = " << cfg.rays_per_batch << "\n"
      << "samples_per_ray = " << cfg.samples_per_ray << "\n"
      << "tilt_cutoff_deg = " << cfg.tilt_cutoff_deg << "\n"
      << "learning_rate = " << cfg.learning_rate << "\n"
      << "seed = " << cfg.seed << "\n"
      << "ablation = " << ablation_name(cfg.ablation) << "\n";
  return out.str();
}

}  // namespace nfsem
