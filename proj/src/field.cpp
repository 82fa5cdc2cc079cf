#include "nfsem/field.hpp"

#include <cmath>
#include <stdexcept>

namespace nfsem {

namespace {
constexpr std::uint32_t kPrimeY = 2654435761u;
constexpr std::uint32_t kPrimeZ = 805459861u;
}  // namespace

int FieldConfig::level_resolution(int level) const {
  return static_cast<int>(std::lround(base_resolution * std::pow(growth_factor, level)));
}

FieldLayout::FieldLayout(const FieldConfig& cfg) {
  hash_offset = 0;
  hash_count = static_cast<std::size_t>(cfg.levels) * cfg.table_size() * cfg.features_per_level;
  w1_offset = hash_offset + hash_count;
  const std::size_t w1_count = static_cast<std::size_t>(cfg.hidden) * cfg.mlp_input_dim();
  b1_offset = w1_offset + w1_count;
  w2_offset = b1_offset + cfg.hidden;
  b2_offset = w2_offset + cfg.hidden;
  sharpness_offset = b2_offset + 1;
  count = sharpness_offset + 1;
}

SdfField::SdfField(const FieldConfig& cfg) : cfg_(cfg), layout_(cfg) {
  if (cfg_.levels < 1 || cfg_.levels > 16 || cfg_.mlp_input_dim() > 64)
    throw std::invalid_argument("SdfField: unsupported encoding dimensions");
  resolutions_.resize(cfg_.levels);
  dense_.resize(cfg_.levels);
  for (int l = 0; l < cfg_.levels; ++l) {
    resolutions_[l] = cfg_.level_resolution(l);
    const std::int64_t corners = static_cast<std::int64_t>(resolutions_[l] + 1) *
                                 (resolutions_[l] + 1) * (resolutions_[l] + 1);
    dense_[l] = corners <= cfg_.table_size();
  }
}

void SdfField::init_parameters(std::span<double> params, Rng& rng) const {
  const int in_dim = cfg_.mlp_input_dim();
  for (std::size_t i = 0; i < layout_.hash_count; ++i)
    params[layout_.hash_offset + i] = rng.uniform(-1e-4, 1e-4);

  // Hidden rows: a random unit direction on the coordinate slots and small
  // noise on the feature slots. With w2 = 4/hidden the expectation of
  // sum(w2 * relu(u . d)) over random unit u is |d|, so the initial field is
  // close to |x - center| - init_radius.
  for (int h = 0; h < cfg_.hidden; ++h) {
    double ux = rng.gaussian(), uy = rng.gaussian(), uz = rng.gaussian();
    const double n = std::sqrt(ux * ux + uy * uy + uz * uz) + 1e-12;
    ux /= n;
    uy /= n;
    uz /= n;
    double* row = params.data() + layout_.w1_offset + static_cast<std::size_t>(h) * in_dim;
    for (int j = 0; j < cfg_.encoded_dim(); ++j) row[j] = 0.1 * rng.gaussian();
    row[in_dim - 3] = ux;
    row[in_dim - 2] = uy;
    row[in_dim - 1] = uz;
    params[layout_.b1_offset + h] = 0.0;
    params[layout_.w2_offset + h] = (4.0 / cfg_.hidden) * (1.0 + 0.05 * rng.gaussian());
  }
  params[layout_.b2_offset] = -cfg_.init_radius;
  params[layout_.sharpness_offset] = std::log(cfg_.init_sharpness);
}

double SdfField::sharpness(std::span<const double> params) const {
  return std::exp(params[layout_.sharpness_offset]);
}

Vec3 SdfField::clamp_to_bounds(const Vec3& x) const {
  Vec3 c{std::fmin(std::fmax(x.x, 0.0), 1.0), std::fmin(std::fmax(x.y, 0.0), 1.0),
         std::fmin(std::fmax(x.z, 0.0), 1.0)};
  if (c.x != x.x || c.y != x.y || c.z != x.z)
    clamp_events_.fetch_add(1, std::memory_order_relaxed);
  return c;
}

SdfField::CornerSet SdfField::level_corners(int level, const Vec3& x) const {
  const int res = resolutions_[level];
  const double px = x.x * res, py = x.y * res, pz = x.z * res;
  int ix = static_cast<int>(px), iy = static_cast<int>(py), iz = static_cast<int>(pz);
  if (ix >= res) ix = res - 1;
  if (iy >= res) iy = res - 1;
  if (iz >= res) iz = res - 1;
  const double fx = px - ix, fy = py - iy, fz = pz - iz;

  CornerSet cs;
  const std::uint32_t mask = static_cast<std::uint32_t>(cfg_.table_size() - 1);
  const std::uint32_t level_base =
      static_cast<std::uint32_t>(layout_.hash_offset) +
      static_cast<std::uint32_t>(level) * cfg_.table_size() * cfg_.features_per_level;
  const double wx[2] = {1.0 - fx, fx};
  const double wy[2] = {1.0 - fy, fy};
  const double wz[2] = {1.0 - fz, fz};
  const double r = static_cast<double>(res);
  int c = 0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx, ++c) {
        const std::uint32_t gx = static_cast<std::uint32_t>(ix + dx);
        const std::uint32_t gy = static_cast<std::uint32_t>(iy + dy);
        const std::uint32_t gz = static_cast<std::uint32_t>(iz + dz);
        std::uint32_t idx;
        if (dense_[level]) {
          const std::uint32_t n1 = static_cast<std::uint32_t>(res + 1);
          idx = gx + n1 * (gy + n1 * gz);
        } else {
          idx = (gx ^ (gy * kPrimeY) ^ (gz * kPrimeZ)) & mask;
        }
        cs.index[c] = level_base + idx * cfg_.features_per_level;
        cs.weight[c] = wx[dx] * wy[dy] * wz[dz];
        cs.dwx[c] = (dx ? 1.0 : -1.0) * r * wy[dy] * wz[dz];
        cs.dwy[c] = (dy ? 1.0 : -1.0) * r * wx[dx] * wz[dz];
        cs.dwz[c] = (dz ? 1.0 : -1.0) * r * wx[dx] * wy[dy];
      }
  return cs;
}

double SdfField::sdf(const Vec3& x_in, std::span<const double> params) const {
  double s;
  sdf_with_gradient_impl(x_in, params, s, nullptr, false);
  return s;
}

Vec3 SdfField::sdf_gradient(const Vec3& x, std::span<const double> params) const {
  double s;
  Vec3 g;
  sdf_with_gradient_impl(x, params, s, &g, true);
  return g;
}

void SdfField::sdf_with_gradient(const Vec3& x, std::span<const double> params, double& s,
                                 Vec3& grad) const {
  sdf_with_gradient_impl(x, params, s, &grad, true);
}

void SdfField::sdf_with_gradient_impl(const Vec3& x_in, std::span<const double> params, double& s,
                                      Vec3* grad, bool want_grad) const {
  const Vec3 x = clamp_to_bounds(x_in);
  const int enc_dim = cfg_.encoded_dim();
  const int in_dim = cfg_.mlp_input_dim();
  const int feat = cfg_.features_per_level;

  // u = [features, centered coordinates]; du[j][d] = d u_j / d x_d.
  double u[64];
  double du[64][3];
  for (int l = 0; l < cfg_.levels; ++l) {
    const CornerSet cs = level_corners(l, x);
    for (int k = 0; k < feat; ++k) {
      const int j = l * feat + k;
      double f = 0.0, gx = 0.0, gy = 0.0, gz = 0.0;
      for (int c = 0; c < 8; ++c) {
        const double v = params[cs.index[c] + k];
        f += v * cs.weight[c];
        gx += v * cs.dwx[c];
        gy += v * cs.dwy[c];
        gz += v * cs.dwz[c];
      }
      u[j] = f;
      du[j][0] = gx;
      du[j][1] = gy;
      du[j][2] = gz;
    }
  }
  u[enc_dim + 0] = x.x - 0.5;
  u[enc_dim + 1] = x.y - 0.5;
  u[enc_dim + 2] = x.z - 0.5;

  const double* w1 = params.data() + layout_.w1_offset;
  const double* b1 = params.data() + layout_.b1_offset;
  const double* w2 = params.data() + layout_.w2_offset;

  // Summation order mirrors the tape emission exactly (dot first, bias
  // last; output sum over all units including zeros) so both paths agree
  // bit for bit.
  double act[64];
  for (int h = 0; h < cfg_.hidden; ++h) {
    const double* row = w1 + static_cast<std::size_t>(h) * in_dim;
    double z = 0.0;
    for (int j = 0; j < in_dim; ++j) z += row[j] * u[j];
    z += b1[h];
    act[h] = z > 0.0 ? z : 0.0;
  }
  double out = 0.0;
  for (int h = 0; h < cfg_.hidden; ++h) out += w2[h] * act[h];
  s = out + params[layout_.b2_offset];

  if (want_grad && grad) {
    double m[64];
    for (int h = 0; h < cfg_.hidden; ++h) m[h] = act[h] > 0.0 ? w2[h] : 0.0;
    double v[64];
    for (int j = 0; j < in_dim; ++j) {
      double acc = 0.0;
      for (int h = 0; h < cfg_.hidden; ++h) acc += w1[static_cast<std::size_t>(h) * in_dim + j] * m[h];
      v[j] = acc;
    }
    double g[3];
    for (int d = 0; d < 3; ++d) {
      double acc = 0.0;
      for (int j = 0; j < enc_dim; ++j) acc += v[j] * du[j][d];
      g[d] = acc + v[enc_dim + d];
    }
    *grad = {g[0], g[1], g[2]};
  }
}

FieldTapeLeaves SdfField::prepare_tape(ad::Tape& tape) const {
  FieldTapeLeaves ids;
  const int in_dim = cfg_.mlp_input_dim();
  ids.w1_base = tape.leaf(static_cast<std::uint32_t>(layout_.w1_offset));
  for (std::size_t i = 1; i < static_cast<std::size_t>(cfg_.hidden) * in_dim; ++i)
    tape.leaf(static_cast<std::uint32_t>(layout_.w1_offset + i));
  ids.b1_base = tape.leaf(static_cast<std::uint32_t>(layout_.b1_offset));
  for (int h = 1; h < cfg_.hidden; ++h)
    tape.leaf(static_cast<std::uint32_t>(layout_.b1_offset + h));
  ids.w2_base = tape.leaf(static_cast<std::uint32_t>(layout_.w2_offset));
  for (int h = 1; h < cfg_.hidden; ++h)
    tape.leaf(static_cast<std::uint32_t>(layout_.w2_offset + h));
  ids.b2 = tape.leaf(static_cast<std::uint32_t>(layout_.b2_offset));
  ids.log_sharpness = tape.leaf(static_cast<std::uint32_t>(layout_.sharpness_offset));
  ids.sharpness = tape.exp(ids.log_sharpness);
  return ids;
}

SdfSampleNodes SdfField::emit_sample(ad::Tape& tape, const FieldTapeLeaves& leaves,
                                     const Vec3& x_in) const {
  const Vec3 x = clamp_to_bounds(x_in);
  const int enc_dim = cfg_.encoded_dim();
  const int in_dim = cfg_.mlp_input_dim();
  const int feat = cfg_.features_per_level;
  const int hidden = cfg_.hidden;

  // Corner leaves are created (and their ids cached) before any
  // interpolation node so the feature and derivative dot blocks end up
  // contiguous.
  std::array<CornerSet, 16> corners;
  std::array<std::array<ad::NodeId, 16>, 16> leaf_ids;  // [level][corner*feat + k]
  for (int l = 0; l < cfg_.levels; ++l) {
    corners[l] = level_corners(l, x);
    for (int c = 0; c < 8; ++c)
      for (int k = 0; k < feat; ++k)
        leaf_ids[l][c * feat + k] = tape.leaf(corners[l].index[c] + k);
  }

  std::array<ad::NodeId, 8> ids;
  auto gather_ids = [&](int l, int k) {
    for (int c = 0; c < 8; ++c) ids[c] = leaf_ids[l][c * feat + k];
  };

  // u block: enc_dim feature nodes then 3 centered-coordinate constants.
  ad::NodeId u_base = 0;
  for (int l = 0; l < cfg_.levels; ++l)
    for (int k = 0; k < feat; ++k) {
      gather_ids(l, k);
      const ad::NodeId f = tape.dotc(ids, corners[l].weight);
      if (l == 0 && k == 0) u_base = f;
    }
  tape.constant(x.x - 0.5);
  tape.constant(x.y - 0.5);
  tape.constant(x.z - 0.5);

  // Spatial derivative features, xyz-inner: node id = denc_base + 3*j + d.
  ad::NodeId denc_base = 0;
  for (int l = 0; l < cfg_.levels; ++l)
    for (int k = 0; k < feat; ++k) {
      gather_ids(l, k);
      const ad::NodeId dx = tape.dotc(ids, corners[l].dwx);
      tape.dotc(ids, corners[l].dwy);
      tape.dotc(ids, corners[l].dwz);
      if (l == 0 && k == 0) denc_base = dx;
    }

  // Hidden activations, one fused node per unit.
  ad::NodeId a_base = 0;
  for (int h = 0; h < hidden; ++h) {
    const ad::NodeId a =
        tape.relu_dot_bias(leaves.w1_base + static_cast<ad::NodeId>(h) * in_dim, u_base,
                           static_cast<std::uint32_t>(in_dim),
                           leaves.b1_base + static_cast<ad::NodeId>(h));
    if (h == 0) a_base = a;
  }

  SdfSampleNodes out;
  const ad::NodeId s_dot = tape.dot(leaves.w2_base, 1, a_base, 1, static_cast<std::uint32_t>(hidden));
  out.sdf = tape.add(s_dot, leaves.b2);

  // m_h = w2_h * 1{z_h > 0}; the activation doubles as the mask argument.
  ad::NodeId m_base = 0;
  for (int h = 0; h < hidden; ++h) {
    const ad::NodeId m = tape.mask_mul(leaves.w2_base + static_cast<ad::NodeId>(h),
                                       a_base + static_cast<ad::NodeId>(h));
    if (h == 0) m_base = m;
  }

  // v_j = sum_h m_h w1[h][j]; the w1 leaf block is row-major so column j is
  // the strided range (w1_base + j, stride in_dim).
  ad::NodeId v_base = 0;
  for (int j = 0; j < in_dim; ++j) {
    const ad::NodeId vj =
        tape.dot(leaves.w1_base + static_cast<ad::NodeId>(j), static_cast<std::uint32_t>(in_dim),
                 m_base, 1, static_cast<std::uint32_t>(hidden));
    if (j == 0) v_base = vj;
  }

  for (int d = 0; d < 3; ++d) {
    const ad::NodeId dsum =
        tape.dot(v_base, 1, denc_base + static_cast<ad::NodeId>(d), 3,
                 static_cast<std::uint32_t>(enc_dim));
    out.gradient[d] = tape.add(dsum, v_base + static_cast<ad::NodeId>(enc_dim + d));
  }
  return out;
}

}  // namespace nfsem
