#include "ivc/ray_index.h"

#include "ivc/error.h"

#include <algorithm>
#include <numeric>

namespace ivc {

namespace {

constexpr int kLeafSize = 4;

}  // namespace

RayIndex::RayIndex(const Mesh& mesh) {
  corners_.reserve(mesh.triangles.size());
  std::vector<Vec3> centroids;
  centroids.reserve(mesh.triangles.size());
  for (const auto& tri : mesh.triangles) {
    corners_.push_back({mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]});
    centroids.push_back((corners_.back()[0] + corners_.back()[1] + corners_.back()[2]) / 3.0);
  }
  order_.resize(corners_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!corners_.empty()) {
    nodes_.reserve(2 * corners_.size() / kLeafSize + 1);
    build(0, static_cast<int>(order_.size()), centroids);
  }
}

int RayIndex::build(int begin, int end, const std::vector<Vec3>& centroids) {
  const int node_index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();

  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroid_box;
  for (int i = begin; i < end; ++i) {
    for (const auto& c : corners_[order_[i]]) box.extend(c);
    centroid_box.extend(centroids[order_[i]]);
  }
  // Pad so rounding in the slab test never rejects a contained triangle.
  const double pad = 1e-9 * (1.0 + box.diagonal().norm());
  box.min().array() -= pad;
  box.max().array() += pad;
  nodes_[node_index].box = box;

  if (end - begin <= kLeafSize) {
    nodes_[node_index].first = begin;
    nodes_[node_index].count = end - begin;
    return node_index;
  }

  int axis = 0;
  centroid_box.diagonal().maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    const double ca = centroids[a][axis];
    const double cb = centroids[b][axis];
    return ca < cb || (ca == cb && a < b);
  });

  const int left = build(begin, mid, centroids);
  const int right = build(mid, end, centroids);
  nodes_[node_index].first = left;
  nodes_[node_index].right = right;
  return node_index;
}

const Eigen::AlignedBox3d& RayIndex::bounds() const {
  static const Eigen::AlignedBox3d kEmpty;
  return nodes_.empty() ? kEmpty : nodes_.front().box;
}

std::optional<RayHit> RayIndex::intersect(const Vec3& origin, const Vec3& direction) const {
  if (!is_unit(direction)) {
    throw Error(ErrorCode::InvalidDirection, "ray direction must be unit length");
  }
  if (nodes_.empty()) {
    return std::nullopt;
  }
  const Vec3 inv = direction.cwiseInverse();

  std::optional<RayHit> best;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    const auto entry = intersect_ray_box<double>(origin, inv, node.box);
    if (!entry || (best && *entry > best->distance_mm)) {
      continue;
    }
    if (node.count > 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int t = order_[i];
        const auto& c = corners_[t];
        const auto hit = intersect_ray_triangle<double>(origin, direction, c[0], c[1], c[2], kRayEpsilonMm);
        if (!hit) continue;
        RayHit candidate{t, origin + hit->t * direction, hit->t, hit->barycentric};
        if (!best || closer(candidate, *best)) {
          best = candidate;
        }
      }
      continue;
    }
    // Visit the nearer child first.
    const auto el = intersect_ray_box<double>(origin, inv, nodes_[node.first].box);
    const auto er = intersect_ray_box<double>(origin, inv, nodes_[node.right].box);
    if (el && er && *er < *el) {
      stack[top++] = node.first;
      stack[top++] = node.right;
    } else {
      stack[top++] = node.right;
      stack[top++] = node.first;
    }
  }
  return best;
}

RayIndex build_ray_index(const Mesh& m) { return RayIndex(m); }

std::optional<RayHit> ray_intersect(const RayIndex& idx, const Vec3& origin, const Vec3& direction) {
  return idx.intersect(origin, direction);
}

}  // namespace ivc
