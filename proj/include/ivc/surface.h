#pragma once

#include "ivc/types.h"
#include "ivc/volume.h"

#include <filesystem>
#include <string>
#include <vector>

namespace ivc {

/// Lumen wall. Triangles are counter-clockwise seen from the lumen, so
/// geometric normals and `normals` point into the air.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Eigen::Vector3i> triangles;
  std::vector<Vec3> normals;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }

  Vec3 face_normal(std::size_t t) const;  // unnormalized, length = 2 * area
  double triangle_area(std::size_t t) const;
};

struct IsosurfaceOptions {
  /// Passes of the 3x3x3 box filter applied to the mask indicator.
  int smoothing_passes = 1;
};

/// Extracts the 0.5 level of the (smoothed) mask indicator in world mm.
/// Cells are split into six tetrahedra along the main diagonal, so the
/// surface is closed whenever the mask stays off the grid boundary.
Mesh extract_isosurface(const LumenMask& mask, const Volume& v, const IsosurfaceOptions& options = {});
Mesh extract_isosurface(const LumenMask& mask, const IsosurfaceOptions& options = {});

/// Area-weighted, unit-length vertex normals from the face orientation.
std::vector<Vec3> compute_vertex_normals(const Mesh& m);

double surface_area(const Mesh& m);
/// Signed volume enclosed by a closed mesh; positive for an air cavity.
double enclosed_volume(const Mesh& m);
/// V - E + F.
long euler_characteristic(const Mesh& m);
/// Every undirected edge is shared by exactly two triangles.
bool is_watertight(const Mesh& m);
/// Throws InvalidData on bad indices, zero-area triangles or non-unit normals.
void validate_mesh(const Mesh& m);

std::string to_obj(const Mesh& m);
void write_obj(const Mesh& m, const std::filesystem::path& path);

}  // namespace ivc
