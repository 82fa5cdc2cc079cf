#include "nfsem/mesh.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "nfsem/parallel.hpp"

namespace nfsem {

std::size_t TriangleMesh::edge_count() const {
  std::set<std::uint64_t> edges;
  for (const auto& t : triangles)
    for (int k = 0; k < 3; ++k) {
      const std::uint64_t a = t[k], b = t[(k + 1) % 3];
      edges.insert(a < b ? (a << 32 | b) : (b << 32 | a));
    }
  return edges.size();
}

std::int64_t TriangleMesh::euler_characteristic() const {
  return static_cast<std::int64_t>(vertices.size()) - static_cast<std::int64_t>(edge_count()) +
         static_cast<std::int64_t>(triangles.size());
}

namespace {

// Freudenthal split: six tetrahedra around the c0-c7 diagonal; shared faces
// of neighboring cells get matching diagonals, so welded surfaces close up.
constexpr int kTets[6][4] = {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7},
                             {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};

struct Welder {
  std::unordered_map<std::uint64_t, std::uint32_t> map;
  TriangleMesh* mesh;

  std::uint32_t vertex(std::uint64_t ga, std::uint64_t gb, Vec3 pa, Vec3 pb, double sa,
                       double sb) {
    if (ga > gb) {
      std::swap(ga, gb);
      std::swap(pa, pb);
      std::swap(sa, sb);
    }
    const std::uint64_t key = ga * 0x100000000ull ^ gb;
    auto it = map.find(key);
    if (it != map.end()) return it->second;
    const double t = sa / (sa - sb);
    const Vec3 v = pa + (pb - pa) * t;
    const auto id = static_cast<std::uint32_t>(mesh->vertices.size());
    mesh->vertices.push_back(v);
    map.emplace(key, id);
    return id;
  }
};

double triangle_area(const TriangleMesh& m, const std::array<std::uint32_t, 3>& t) {
  const Vec3 ab = m.vertices[t[1]] - m.vertices[t[0]];
  const Vec3 ac = m.vertices[t[2]] - m.vertices[t[0]];
  return 0.5 * norm(cross(ab, ac));
}

}  // namespace

TriangleMesh marching_cubes_grid(std::span<const double> grid, int resolution) {
  const int r = resolution;
  const std::int64_t n1 = r + 1;
  if (static_cast<std::int64_t>(grid.size()) != n1 * n1 * n1)
    throw std::invalid_argument("marching_cubes_grid: grid size mismatch");

  TriangleMesh mesh;
  Welder weld{{}, &mesh};
  const double h = 1.0 / r;

  auto gid = [&](int x, int y, int z) {
    return static_cast<std::uint64_t>(x) + static_cast<std::uint64_t>(n1) * (y + n1 * z);
  };
  auto corner_pos = [&](std::uint64_t g) {
    const int x = static_cast<int>(g % n1);
    const int y = static_cast<int>((g / n1) % n1);
    const int z = static_cast<int>(g / (n1 * n1));
    return Vec3{x * h, y * h, z * h};
  };
  // Exact zeros would put vertices on grid corners and break edge welding;
  // nudge them onto the positive side.
  auto sample = [&](std::uint64_t g) {
    const double s = grid[g];
    return std::fabs(s) < 1e-12 ? 1e-12 : s;
  };

  for (int z = 0; z < r; ++z)
    for (int y = 0; y < r; ++y)
      for (int x = 0; x < r; ++x) {
        std::uint64_t cg[8];
        double cs[8];
        bool any_neg = false, any_pos = false;
        for (int c = 0; c < 8; ++c) {
          cg[c] = gid(x + (c & 1), y + ((c >> 1) & 1), z + ((c >> 2) & 1));
          cs[c] = sample(cg[c]);
          (cs[c] < 0.0 ? any_neg : any_pos) = true;
        }
        if (!any_neg || !any_pos) continue;

        for (const auto& tet : kTets) {
          int inside[4], outside[4];
          int ni = 0, no = 0;
          for (int k = 0; k < 4; ++k)
            (cs[tet[k]] < 0.0 ? inside[ni++] : outside[no++]) = tet[k];
          if (ni == 0 || ni == 4) continue;

          auto ev = [&](int a, int b) {
            return weld.vertex(cg[a], cg[b], corner_pos(cg[a]), corner_pos(cg[b]), cs[a], cs[b]);
          };
          auto emit = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c, const Vec3& ref) {
            if (a == b || b == c || a == c) return;
            std::array<std::uint32_t, 3> tri{a, b, c};
            const Vec3 n = cross(mesh.vertices[b] - mesh.vertices[a],
                                 mesh.vertices[c] - mesh.vertices[a]);
            if (dot(n, ref) < 0.0) std::swap(tri[1], tri[2]);
            if (triangle_area(mesh, tri) > 1e-12) mesh.triangles.push_back(tri);
          };
          // Reference direction: from the inside side toward the outside side.
          Vec3 in_c{0, 0, 0}, out_c{0, 0, 0};
          for (int k = 0; k < ni; ++k) in_c += corner_pos(cg[inside[k]]);
          for (int k = 0; k < no; ++k) out_c += corner_pos(cg[outside[k]]);
          const Vec3 ref = out_c / no - in_c / ni;

          if (ni == 1) {
            emit(ev(inside[0], outside[0]), ev(inside[0], outside[1]), ev(inside[0], outside[2]),
                 ref);
          } else if (ni == 3) {
            emit(ev(inside[0], outside[0]), ev(inside[1], outside[0]), ev(inside[2], outside[0]),
                 ref);
          } else {  // ni == 2: quad split into two triangles
            const std::uint32_t v00 = ev(inside[0], outside[0]);
            const std::uint32_t v01 = ev(inside[0], outside[1]);
            const std::uint32_t v11 = ev(inside[1], outside[1]);
            const std::uint32_t v10 = ev(inside[1], outside[0]);
            emit(v00, v01, v11, ref);
            emit(v00, v11, v10, ref);
          }
        }
      }
  return mesh;
}

TriangleMesh marching_cubes(const SdfField& field, std::span<const double> params,
                            int resolution) {
  if (resolution < 8) throw std::invalid_argument("marching_cubes: resolution must be >= 8");
  const std::int64_t n1 = resolution + 1;
  std::vector<double> grid(static_cast<std::size_t>(n1 * n1 * n1));
  const double h = 1.0 / resolution;
  parallel_for(n1, [&](std::int64_t z) {
    for (std::int64_t y = 0; y < n1; ++y)
      for (std::int64_t x = 0; x < n1; ++x)
        grid[static_cast<std::size_t>(x + n1 * (y + n1 * z))] =
            field.sdf({x * h, y * h, z * h}, params);
  });
  return marching_cubes_grid(grid, resolution);
}

void write_obj(const std::string& path, const TriangleMesh& mesh) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path);
  for (const Vec3& v : mesh.vertices) std::fprintf(f, "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
  for (const auto& t : mesh.triangles)
    std::fprintf(f, "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
  std::fclose(f);
}

void write_ply(const std::string& path, const TriangleMesh& mesh) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write " + path);
  std::fprintf(f,
               "ply\nformat binary_little_endian 1.0\nelement vertex %zu\n"
               "property float x\nproperty float y\nproperty float z\n"
               "element face %zu\nproperty list uchar int vertex_indices\nend_header\n",
               mesh.vertices.size(), mesh.triangles.size());
  for (const Vec3& v : mesh.vertices) {
    const float xyz[3] = {static_cast<float>(v.x), static_cast<float>(v.y),
                          static_cast<float>(v.z)};
    std::fwrite(xyz, sizeof(float), 3, f);
  }
  for (const auto& t : mesh.triangles) {
    const std::uint8_t n = 3;
    std::fwrite(&n, 1, 1, f);
    const std::int32_t idx[3] = {static_cast<std::int32_t>(t[0]), static_cast<std::int32_t>(t[1]),
                                 static_cast<std::int32_t>(t[2])};
    std::fwrite(idx, sizeof(std::int32_t), 3, f);
  }
  std::fclose(f);
}

void write_mesh_sidecar(const std::string& path, double scene_scale, int resolution) {
  nlohmann::json j = {{"units", "scene"},
                      {"micrometers_per_unit", scene_scale},
                      {"bounds", {0.0, 0.0, 0.0, 1.0, 1.0, 1.0}},
                      {"resolution", resolution}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

TriangleMesh height_map_mesh(const Image<float>& depth, const Image<std::uint8_t>& mask,
                             double pixel_size) {
  TriangleMesh mesh;
  const int w = depth.width(), h = depth.height();
  std::vector<std::int32_t> vid(depth.pixel_count(), -1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      vid[static_cast<std::size_t>(y) * w + x] = static_cast<std::int32_t>(mesh.vertices.size());
      // Depth is measured toward the camera plane: flip so larger heights
      // render upward in the exported mesh.
      mesh.vertices.push_back({x * pixel_size, (h - 1 - y) * pixel_size,
                               -static_cast<double>(depth.at(x, y))});
    }
  auto id = [&](int x, int y) { return vid[static_cast<std::size_t>(y) * w + x]; };
  for (int y = 0; y + 1 < h; ++y)
    for (int x = 0; x + 1 < w; ++x) {
      const std::int32_t a = id(x, y), b = id(x + 1, y), c = id(x, y + 1), d = id(x + 1, y + 1);
      if (a >= 0 && b >= 0 && c >= 0)
        mesh.triangles.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                                  static_cast<std::uint32_t>(c)});
      if (b >= 0 && d >= 0 && c >= 0)
        mesh.triangles.push_back({static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(d),
                                  static_cast<std::uint32_t>(c)});
    }
  return mesh;
}

}  // namespace nfsem
