#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nfsem/field.hpp"
#include "nfsem/geometry.hpp"
#include "nfsem/image.hpp"

namespace nfsem {

struct TriangleMesh {
  std::vector<Vec3> vertices;                    // scene units
  std::vector<std::array<std::uint32_t, 3>> triangles;

  std::size_t edge_count() const;                // unique undirected edges
  // V - E + F; 2 for a closed sphere-topology surface.
  std::int64_t euler_characteristic() const;
};

// Iso-surface of the field at s = 0 on a resolution^3 voxel grid spanning
// the unit cube, with linear interpolation along cell edges. Cells are
// marched as six tetrahedra (consistent Freudenthal split), which avoids
// the ambiguous-face cases of the classic cube table; vertices are welded
// on shared edges, so closed surfaces come out watertight. An all-positive
// or all-negative field yields an empty mesh.
TriangleMesh marching_cubes(const SdfField& field, std::span<const double> params, int resolution);

// Same extraction for an arbitrary sampled scalar grid (values at the
// (n+1)^3 lattice corners of the unit cube), used by tests with analytic
// fields.
TriangleMesh marching_cubes_grid(std::span<const double> grid, int resolution);

void write_obj(const std::string& path, const TriangleMesh& mesh);
void write_ply(const std::string& path, const TriangleMesh& mesh);  // binary little-endian
// Sidecar JSON recording units and extraction settings.
void write_mesh_sidecar(const std::string& path, double scene_scale, int resolution);

// Simple height-map triangulation (two triangles per pixel quad) for the
// photometric-stereo baseline output. Heights are depth values; the mask
// selects participating pixels.
TriangleMesh height_map_mesh(const Image<float>& depth, const Image<std::uint8_t>& mask,
                             double pixel_size);

}  // namespace nfsem
