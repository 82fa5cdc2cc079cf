#include "nfsem/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace nfsem {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;
const char* kQuadrantNames[4] = {"a", "b", "c", "d"};

json pose_to_json(const Pose& pose) {
  json m = json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      if (r < 3 && c < 3)
        m.push_back(pose.rot(r, c));
      else if (r < 3)
        m.push_back(r == 0 ? pose.trans.x : (r == 1 ? pose.trans.y : pose.trans.z));
      else
        m.push_back(c == 3 ? 1.0 : 0.0);
    }
  return m;
}

Pose pose_from_json(const json& m) {
  if (!m.is_array() || m.size() != 16)
    throw std::runtime_error("manifest: pose must be a 16-element row-major matrix");
  Pose pose;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) pose.rot.m[r * 3 + c] = m[r * 4 + c].get<double>();
  pose.trans = {m[3].get<double>(), m[7].get<double>(), m[11].get<double>()};
  // Rigid-transform check: R^T R = I within 1e-6.
  const Mat3 rtr = pose.rot.transposed() * pose.rot;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const double expect = r == c ? 1.0 : 0.0;
      if (std::fabs(rtr(r, c) - expect) > 1e-6)
        throw std::runtime_error("manifest: pose rotation is not orthonormal");
    }
  return pose;
}

json phi_to_json(const ForwardModelParams& phi) {
  return json{{"c", phi.c},
              {"d", phi.d},
              {"e", phi.e},
              {"p", phi.p},
              {"detector_rotation", phi.detector_rotation},
              {"emission", emission_model_name(phi.emission)}};
}

ForwardModelParams phi_from_json(const json& j) {
  ForwardModelParams phi;
  for (int q = 0; q < 4; ++q) {
    phi.c[q] = j.at("c").at(q).get<double>();
    phi.d[q] = j.at("d").at(q).get<double>();
    phi.e[q] = j.at("e").at(q).get<double>();
    phi.p[q] = j.at("p").at(q).get<double>();
  }
  phi.detector_rotation = j.value("detector_rotation", 0.0);
  phi.emission = emission_model_from_name(j.value("emission", "polynomial"));
  return phi;
}

void check_known_fields(const json& obj, const std::set<std::string>& known,
                        const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key()))
      throw std::runtime_error("manifest: unknown field \"" + it.key() + "\" in " + where);
}

ByteImage quantize(const FloatMap& m) {
  ByteImage img(m.width(), m.height());
  for (std::size_t i = 0; i < m.pixel_count(); ++i) {
    const double v = std::fmin(std::fmax(static_cast<double>(m[i]), 0.0), 255.0);
    img[i] = static_cast<std::uint8_t>(std::lround(v));
  }
  return img;
}

FloatMap mask_to_map(const Image<std::uint8_t>& mask) {
  FloatMap m(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) m[i] = mask[i] ? 1.0f : 0.0f;
  return m;
}

void require_shape(const FloatMap& m, int w, int h, int c, const std::string& path) {
  if (m.width() != w || m.height() != h || m.channels() != c)
    throw std::runtime_error("manifest: " + path + " does not match the declared dimensions");
}

}  // namespace

bool Dataset::has_ground_truth() const {
  for (const auto& v : views)
    if (!v.gt_depth || !v.gt_normal || !v.gt_mask) return false;
  return !views.empty();
}

std::string write_dataset(const std::string& dir, const SimulatedDataset& sim) {
  fs::create_directories(dir);
  json views = json::array();
  for (std::size_t v = 0; v < sim.views.size(); ++v) {
    const SimulatedView& view = sim.views[v];
    char buf[32];
    std::snprintf(buf, sizeof(buf), "view_%03zu", v);
    const std::string rel = std::string("views/") + buf;
    fs::create_directories(fs::path(dir) / rel);
    auto path = [&](const std::string& leaf) { return rel + "/" + leaf; };
    auto full = [&](const std::string& leaf) { return (fs::path(dir) / rel / leaf).string(); };

    write_float_map(full("depth.fmap"), view.coarse_depth);
    write_float_map(full("confidence.fmap"), view.confidence);
    json bse = json::array();
    for (int q = 0; q < 4; ++q) {
      const std::string leaf = std::string("bse_") + kQuadrantNames[q] + ".png";
      write_gray_png(full(leaf), quantize(view.bse[q]));
      bse.push_back(path(leaf));
    }
    write_float_map(full("gt_depth.fmap"), view.gt_depth);
    write_float_map(full("gt_normal.fmap"), view.gt_normal);
    write_float_map(full("gt_mask.fmap"), mask_to_map(view.foreground));
    json shadows = json::array();
    for (int q = 0; q < 4; ++q) {
      const std::string leaf = std::string("gt_shadow_") + kQuadrantNames[q] + ".fmap";
      write_float_map(full(leaf), view.shadow[q]);
      shadows.push_back(path(leaf));
    }

    json jview = {{"pose", pose_to_json(view.camera.pose)},
                  {"intrinsics",
                   {{"type", view.camera.intr.type_name()},
                    {"pixel_size", view.camera.intr.pixel_size},
                    {"focal_px", view.camera.intr.focal_px}}},
                  {"depth", path("depth.fmap")},
                  {"confidence", path("confidence.fmap")},
                  {"bse", bse},
                  {"gt_depth", path("gt_depth.fmap")},
                  {"gt_normal", path("gt_normal.fmap")},
                  {"gt_mask", path("gt_mask.fmap")},
                  {"gt_shadow", shadows}};
    views.push_back(jview);
  }

  json manifest = {{"version", kManifestVersion},
                   {"width", sim.options.width},
                   {"height", sim.options.height},
                   {"scene_scale", sim.scene.scene_scale},
                   {"scene", sim.scene.name},
                   {"noise_sigma", sim.options.noise_sigma},
                   {"phi_gt", phi_to_json(sim.scene.phi_gt)},
                   {"views", views}};
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot write " + manifest_path);
  out << manifest.dump(2) << "\n";
  return manifest_path;
}

Dataset load_dataset(const std::string& dir) {
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open " + manifest_path);
  json manifest = json::parse(in);

  check_known_fields(manifest,
                     {"version", "width", "height", "scene_scale", "scene", "noise_sigma",
                      "phi_gt", "views"},
                     "manifest");
  const int version = manifest.at("version").get<int>();
  if (version != kManifestVersion)
    throw std::runtime_error("manifest: unsupported version " + std::to_string(version));

  Dataset ds;
  ds.width = manifest.at("width").get<int>();
  ds.height = manifest.at("height").get<int>();
  ds.scene_scale = manifest.at("scene_scale").get<double>();
  ds.scene_name = manifest.value("scene", "");
  if (manifest.contains("noise_sigma") && !manifest["noise_sigma"].is_null())
    ds.noise_sigma = manifest["noise_sigma"].get<double>();
  if (manifest.contains("phi_gt") && !manifest["phi_gt"].is_null())
    ds.phi_gt = phi_from_json(manifest["phi_gt"]);
  if (ds.width <= 0 || ds.height <= 0) throw std::runtime_error("manifest: bad image size");

  auto load_map = [&](const std::string& rel, int channels) {
    const std::string full = (fs::path(dir) / rel).string();
    if (!fs::exists(full)) throw std::runtime_error("manifest: missing file " + rel);
    FloatMap m = read_float_map(full);
    require_shape(m, ds.width, ds.height, channels, rel);
    return m;
  };

  for (const json& jview : manifest.at("views")) {
    check_known_fields(jview,
                       {"pose", "intrinsics", "depth", "confidence", "bse", "gt_depth",
                        "gt_normal", "gt_mask", "gt_shadow"},
                       "view");
    ViewRecord view;
    view.camera.pose = pose_from_json(jview.at("pose"));
    const json& intr = jview.at("intrinsics");
    check_known_fields(intr, {"type", "pixel_size", "focal_px"}, "intrinsics");
    const std::string type = intr.at("type").get<std::string>();
    if (type == "ortho")
      view.camera.intr.type = Intrinsics::Type::kOrtho;
    else if (type == "pinhole")
      view.camera.intr.type = Intrinsics::Type::kPinhole;
    else
      throw std::runtime_error("manifest: unknown intrinsics type \"" + type + "\"");
    view.camera.intr.width = ds.width;
    view.camera.intr.height = ds.height;
    view.camera.intr.pixel_size = intr.value("pixel_size", 0.0);
    view.camera.intr.focal_px = intr.value("focal_px", 0.0);

    view.depth = load_map(jview.at("depth").get<std::string>(), 1);
    view.confidence = load_map(jview.at("confidence").get<std::string>(), 1);
    const json& bse = jview.at("bse");
    if (!bse.is_array() || bse.size() != 4)
      throw std::runtime_error("manifest: bse must list four quadrant images");
    for (int q = 0; q < 4; ++q) {
      const std::string rel = bse[q].get<std::string>();
      const std::string full = (fs::path(dir) / rel).string();
      if (!fs::exists(full)) throw std::runtime_error("manifest: missing file " + rel);
      ByteImage img = read_gray_png(full);
      if (img.width() != ds.width || img.height() != ds.height)
        throw std::runtime_error("manifest: " + rel + " does not match the declared dimensions");
      view.bse[q] = FloatMap(ds.width, ds.height);
      for (std::size_t i = 0; i < img.pixel_count(); ++i)
        view.bse[q][i] = static_cast<float>(img[i]);
    }

    if (jview.contains("gt_depth")) view.gt_depth = load_map(jview["gt_depth"], 1);
    if (jview.contains("gt_normal")) view.gt_normal = load_map(jview["gt_normal"], 3);
    if (jview.contains("gt_mask")) {
      FloatMap m = load_map(jview["gt_mask"], 1);
      Image<std::uint8_t> mask(ds.width, ds.height);
      for (std::size_t i = 0; i < m.pixel_count(); ++i) mask[i] = m[i] > 0.5f ? 1 : 0;
      view.gt_mask = std::move(mask);
    }
    if (jview.contains("gt_shadow")) {
      const json& sh = jview["gt_shadow"];
      if (!sh.is_array() || sh.size() != 4)
        throw std::runtime_error("manifest: gt_shadow must list four maps");
      std::array<FloatMap, 4> maps;
      for (int q = 0; q < 4; ++q) maps[q] = load_map(sh[q].get<std::string>(), 1);
      view.gt_shadow = std::move(maps);
    }
    ds.views.push_back(std::move(view));
  }
  if (ds.views.empty()) throw std::runtime_error("manifest: no views");
  return ds;
}

}  // namespace nfsem
