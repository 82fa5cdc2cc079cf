#include "nfsem/metrics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "nfsem/parallel.hpp"
#include "nfsem/render.hpp"

namespace nfsem {

using nlohmann::json;

RenderedMaps render_view_maps(const SdfField& field, std::span<const double> params,
                              const Camera& cam, int n_samples) {
  const int w = cam.intr.width, h = cam.intr.height;
  RenderedMaps maps;
  maps.depth = FloatMap(w, h);
  maps.normal = FloatMap(w, h, 3);
  maps.hit = Image<std::uint8_t>(w, h, 1, 0);
  const Vec3 lo{0.0, 0.0, 0.0}, hi{1.0, 1.0, 1.0};
  RenderOptions opt;
  opt.n_samples = n_samples;
  opt.weight_cutoff = 1e-6;
  parallel_for(static_cast<std::int64_t>(w) * h, [&](std::int64_t i) {
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    Ray ray = cam.pixel_ray(x, y);
    if (!intersect_box(ray.origin, ray.dir, lo, hi, ray.t_near, ray.t_far)) return;
    const RenderResult r = render_ray(field, params, ray, opt);
    if (!r.hit) {
      maps.depth.at(x, y) = static_cast<float>(ray.t_far);
      return;
    }
    maps.hit.at(x, y) = 1;
    maps.depth.at(x, y) = static_cast<float>(r.depth);
    const Vec3 n_cam = cam.pose.dir_to_camera(r.normal);
    maps.normal.at(x, y, 0) = static_cast<float>(n_cam.x);
    maps.normal.at(x, y, 1) = static_cast<float>(n_cam.y);
    maps.normal.at(x, y, 2) = static_cast<float>(n_cam.z);
  });
  return maps;
}

double eval_depth(const std::vector<const FloatMap*>& pred,
                  const std::vector<const FloatMap*>& gt,
                  const std::vector<const Image<std::uint8_t>*>& masks, double scene_scale) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (std::size_t v = 0; v < pred.size(); ++v)
    for (std::size_t i = 0; i < gt[v]->pixel_count(); ++i) {
      if (!(*masks[v])[i]) continue;
      sum += std::fabs(static_cast<double>((*pred[v])[i]) - (*gt[v])[i]);
      ++n;
    }
  return n > 0 ? scene_scale * sum / static_cast<double>(n) : 0.0;
}

double eval_normal(const std::vector<const FloatMap*>& pred,
                   const std::vector<const FloatMap*>& gt,
                   const std::vector<const Image<std::uint8_t>*>& masks) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    const FloatMap& np = *pred[v];
    const FloatMap& ng = *gt[v];
    for (std::size_t i = 0; i < ng.pixel_count(); ++i) {
      if (!(*masks[v])[i]) continue;
      double dot = 0.0;
      for (int c = 0; c < 3; ++c) dot += static_cast<double>(np[i * 3 + c]) * ng[i * 3 + c];
      dot = std::fmin(std::fmax(dot, -1.0), 1.0);
      sum += rad_to_deg(std::acos(dot));
      ++n;
    }
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

double eval_bse_model(const ForwardModelParams& estimated, const ForwardModelParams& ground_truth,
                      int t_samples) {
  double sum = 0.0;
  for (int q = 0; q < 4; ++q) {
    const double az_est = estimated.quadrant_azimuth(q);
    const double az_gt = ground_truth.quadrant_azimuth(q);
    for (int k = 0; k < t_samples; ++k) {
      const double theta = (k + 0.5) / t_samples * deg_to_rad(60.0);
      sum += std::fabs(bse_forward_angles(estimated, theta, az_est, q) -
                       bse_forward_angles(ground_truth, theta, az_gt, q));
    }
  }
  return sum / (4.0 * t_samples);
}

double eval_shadow(const ForwardModelParams& phi_hat,
                   const std::vector<const FloatMap*>& normals,
                   const std::vector<const Image<std::uint8_t>*>& hit_masks,
                   const std::vector<std::array<const FloatMap*, 4>>& bse,
                   const std::vector<std::array<const FloatMap*, 4>>& gt_shadow,
                   const std::vector<const Image<std::uint8_t>*>& fg_masks) {
  double term_sum = 0.0;
  int terms = 0;
  for (std::size_t v = 0; v < normals.size(); ++v) {
    const FloatMap& nm = *normals[v];
    for (int q = 0; q < 4; ++q) {
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < nm.pixel_count(); ++i) {
        if (!(*fg_masks[v])[i] || !(*hit_masks[v])[i]) continue;
        const double nz = nm[i * 3 + 2];
        if (nz <= 0.0) continue;
        const Vec3 n{nm[i * 3 + 0], nm[i * 3 + 1], nz};
        const double f = bse_forward(phi_hat, normalized(n), q);
        const double psi_hat = std::fabs(f - (*bse[v][q])[i]);
        const double psi_gt = (*gt_shadow[v][q])[i];
        num += std::fabs(psi_gt - psi_hat);
        den += psi_gt + psi_hat;
      }
      if (den > 0.0) {
        term_sum += num / den;
        ++terms;
      }
    }
  }
  if (terms == 0) return 100.0;
  return 100.0 * (1.0 - term_sum / terms);
}

FloatMap depth_to_normals(const FloatMap& depth, const Image<std::uint8_t>& mask,
                          double pixel_size) {
  const int w = depth.width(), h = depth.height();
  FloatMap normals(w, h, 3);
  auto have = [&](int xx, int yy) {
    return xx >= 0 && xx < w && yy >= 0 && yy < h && mask.at(xx, yy);
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      const double z0 = depth.at(x, y);
      auto diff = [&](int dx, int dy) {
        const bool plus = have(x + dx, y + dy);
        const bool minus = have(x - dx, y - dy);
        if (plus && minus)
          return (depth.at(x + dx, y + dy) - static_cast<double>(depth.at(x - dx, y - dy))) /
                 (2.0 * pixel_size);
        if (plus) return (depth.at(x + dx, y + dy) - z0) / pixel_size;
        if (minus) return (z0 - depth.at(x - dx, y - dy)) / pixel_size;
        return 0.0;
      };
      const double zx = diff(1, 0);
      const double zy_rows = diff(0, 1);
      // Image rows run opposite the camera +y axis.
      const Vec3 n = normalized({zx, -zy_rows, 1.0});
      normals.at(x, y, 0) = static_cast<float>(n.x);
      normals.at(x, y, 1) = static_cast<float>(n.y);
      normals.at(x, y, 2) = static_cast<float>(n.z);
    }
  return normals;
}

EvalReport evaluate(const Dataset& data, const SdfField& field, std::span<const double> params,
                    const ForwardModelParams& phi_hat, int n_samples) {
  if (!data.has_ground_truth())
    throw std::invalid_argument("evaluate: dataset has no embedded ground truth");

  EvalReport report;
  const std::size_t nv = data.views.size();
  std::vector<RenderedMaps> rendered(nv);
  std::vector<FloatMap> coarse_normals(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    rendered[v] = render_view_maps(field, params, data.views[v].camera, n_samples);
    coarse_normals[v] = depth_to_normals(data.views[v].depth, *data.views[v].gt_mask,
                                         data.views[v].camera.intr.pixel_size);
  }

  auto full_mask = [&](std::size_t v) { return &*data.views[v].gt_mask; };

  std::vector<const FloatMap*> pred_d(nv), gt_d(nv), pred_n(nv), gt_n(nv), coarse_d(nv),
      coarse_n(nv);
  std::vector<const Image<std::uint8_t>*> masks(nv), hits(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    pred_d[v] = &rendered[v].depth;
    pred_n[v] = &rendered[v].normal;
    gt_d[v] = &*data.views[v].gt_depth;
    gt_n[v] = &*data.views[v].gt_normal;
    coarse_d[v] = &data.views[v].depth;
    coarse_n[v] = &coarse_normals[v];
    masks[v] = full_mask(v);
    hits[v] = &rendered[v].hit;
  }

  // Missed foreground pixels already carry the ray far bound in the depth
  // map; give their normals a 90-degree error by zeroing them.
  std::vector<FloatMap> pred_n_fixed(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    pred_n_fixed[v] = rendered[v].normal;
    for (std::size_t i = 0; i < rendered[v].hit.pixel_count(); ++i)
      if (!(rendered[v].hit)[i])
        for (int c = 0; c < 3; ++c) pred_n_fixed[v][i * 3 + c] = 0.0f;
    pred_n[v] = &pred_n_fixed[v];
  }

  report.e_depth = eval_depth(pred_d, gt_d, masks, data.scene_scale);
  report.e_normal = eval_normal(pred_n, gt_n, masks);
  report.coarse_e_depth = eval_depth(coarse_d, gt_d, masks, data.scene_scale);
  report.coarse_e_normal = eval_normal(coarse_n, gt_n, masks);

  std::int64_t fg = 0, hit = 0;
  for (std::size_t v = 0; v < nv; ++v) {
    ViewRow row, coarse_row;
    row.view = coarse_row.view = static_cast<int>(v);
    row.e_depth = eval_depth({pred_d[v]}, {gt_d[v]}, {masks[v]}, data.scene_scale);
    row.e_normal = eval_normal({pred_n[v]}, {gt_n[v]}, {masks[v]});
    coarse_row.e_depth = eval_depth({coarse_d[v]}, {gt_d[v]}, {masks[v]}, data.scene_scale);
    coarse_row.e_normal = eval_normal({coarse_n[v]}, {gt_n[v]}, {masks[v]});
    std::int64_t vfg = 0, vhit = 0;
    for (std::size_t i = 0; i < masks[v]->pixel_count(); ++i)
      if ((*masks[v])[i]) {
        ++vfg;
        if ((*hits[v])[i]) ++vhit;
      }
    row.coverage = vfg ? static_cast<double>(vhit) / vfg : 1.0;
    fg += vfg;
    hit += vhit;
    report.views.push_back(row);
    report.coarse_views.push_back(coarse_row);
  }
  report.coverage = fg ? static_cast<double>(hit) / fg : 1.0;

  if (data.phi_gt) report.e_bse = eval_bse_model(phi_hat, *data.phi_gt);

  bool have_shadow = true;
  for (const auto& view : data.views) have_shadow &= view.gt_shadow.has_value();
  if (have_shadow) {
    std::vector<const FloatMap*> normals(nv);
    std::vector<std::array<const FloatMap*, 4>> bse(nv), shadow(nv);
    for (std::size_t v = 0; v < nv; ++v) {
      normals[v] = &rendered[v].normal;
      for (int q = 0; q < 4; ++q) {
        bse[v][q] = &data.views[v].bse[q];
        shadow[v][q] = &(*data.views[v].gt_shadow)[q];
      }
    }
    report.s_shadow = eval_shadow(phi_hat, normals, hits, bse, shadow, masks);
  }
  return report;
}

std::string EvalReport::to_json() const {
  json rows = json::array();
  for (const auto& r : views)
    rows.push_back({{"view", r.view},
                    {"e_depth", r.e_depth},
                    {"e_normal", r.e_normal},
                    {"coverage", r.coverage}});
  json coarse_rows = json::array();
  for (const auto& r : coarse_views)
    coarse_rows.push_back({{"view", r.view}, {"e_depth", r.e_depth}, {"e_normal", r.e_normal}});
  json j = {{"e_depth", e_depth},
            {"e_normal", e_normal},
            {"coarse_e_depth", coarse_e_depth},
            {"coarse_e_normal", coarse_e_normal},
            {"coverage", coverage},
            {"views", rows},
            {"coarse_views", coarse_rows}};
  if (e_bse) j["e_bse"] = *e_bse;
  if (s_shadow) j["s_shadow"] = *s_shadow;
  return j.dump(2);
}

void write_eval_report(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << report.to_json() << "\n";
}

}  // namespace nfsem
