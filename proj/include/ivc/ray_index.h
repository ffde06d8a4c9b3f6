#pragma once

#include "ivc/geometry.h"
#include "ivc/surface.h"
#include "ivc/types.h"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace ivc {

inline constexpr double kRayEpsilonMm = 1e-6;

struct RayHit {
  int triangle_index = -1;
  Vec3 point = Vec3::Zero();
  double distance_mm = 0.0;
  Vec3 barycentric = Vec3::Zero();
};

/// Nearest-first ordering: smaller distance, then smaller triangle index.
inline bool closer(const RayHit& a, const RayHit& b) {
  return a.distance_mm < b.distance_mm ||
      (a.distance_mm == b.distance_mm && a.triangle_index < b.triangle_index);
}

/// Bounding-volume hierarchy over a mesh's triangles. Immutable after
/// construction; concurrent queries are safe.
class RayIndex {
 public:
  RayIndex() = default;
  explicit RayIndex(const Mesh& mesh);

  /// Nearest hit with distance > kRayEpsilonMm. InvalidDirection for
  /// non-unit directions.
  std::optional<RayHit> intersect(const Vec3& origin, const Vec3& direction) const;

  std::size_t triangle_count() const { return corners_.size(); }
  std::size_t node_count() const { return nodes_.size(); }
  const Eigen::AlignedBox3d& bounds() const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int first = 0;  // leaf: first slot in order_; inner: left child index
    int count = 0;  // > 0 for leaves
    int right = -1;
  };

  int build(int begin, int end, const std::vector<Vec3>& centroids);

  std::vector<std::array<Vec3, 3>> corners_;  // by original triangle index
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

RayIndex build_ray_index(const Mesh& m);

std::optional<RayHit> ray_intersect(const RayIndex& idx, const Vec3& origin, const Vec3& direction);

}  // namespace ivc
