#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstddef>
#include <cstdint>

namespace ivc {

using Vec3 = Eigen::Vector3d;
using Vec3i = Eigen::Vector3i;

/// Sampling lattice shared by volumes, masks and distance fields.
/// `origin_mm` is the world position of the center of voxel (0,0,0).
struct Grid {
  Vec3i dims = Vec3i::Zero();
  Vec3 spacing_mm = Vec3::Ones();
  Vec3 origin_mm = Vec3::Zero();

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims.x()) * static_cast<std::size_t>(dims.y()) *
        static_cast<std::size_t>(dims.z());
  }

  std::size_t linear(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
        static_cast<std::size_t>(dims.x()) *
        (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims.y()) * static_cast<std::size_t>(k));
  }
  std::size_t linear(const Vec3i& v) const { return linear(v.x(), v.y(), v.z()); }

  Vec3i unlinear(std::size_t idx) const {
    const auto nx = static_cast<std::size_t>(dims.x());
    const auto ny = static_cast<std::size_t>(dims.y());
    return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny), static_cast<int>(idx / (nx * ny))};
  }

  bool contains(const Vec3i& v) const {
    return (v.array() >= 0).all() && (v.array() < dims.array()).all();
  }

  Vec3 world_to_voxel(const Vec3& p) const { return (p - origin_mm).cwiseQuotient(spacing_mm); }
  Vec3 voxel_to_world(const Vec3& v) const { return origin_mm + v.cwiseProduct(spacing_mm); }
  Vec3 voxel_center(const Vec3i& v) const { return voxel_to_world(v.cast<double>()); }

  /// Nearest voxel to a world point (may lie outside the grid).
  Vec3i nearest_voxel(const Vec3& p) const {
    const Vec3 c = world_to_voxel(p);
    return {static_cast<int>(std::lround(c.x())), static_cast<int>(std::lround(c.y())),
            static_cast<int>(std::lround(c.z()))};
  }

  bool operator==(const Grid& o) const {
    return dims == o.dims && spacing_mm == o.spacing_mm && origin_mm == o.origin_mm;
  }
};

}  // namespace ivc
