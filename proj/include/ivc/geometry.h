#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <optional>

namespace ivc {

template <typename S>
struct TriangleHit {
  S t;
  Eigen::Vector3<S> barycentric;  // weights of (a, b, c)
};

/// Double-sided Moller-Trumbore test. Returns the hit when t > t_min.
template <typename S>
std::optional<TriangleHit<S>> intersect_ray_triangle(
    const Eigen::Vector3<S>& origin,
    const Eigen::Vector3<S>& direction,
    const Eigen::Vector3<S>& a,
    const Eigen::Vector3<S>& b,
    const Eigen::Vector3<S>& c,
    S t_min) {
  const Eigen::Vector3<S> e1 = b - a;
  const Eigen::Vector3<S> e2 = c - a;
  const Eigen::Vector3<S> pvec = direction.cross(e2);
  const S det = e1.dot(pvec);
  if (det == S(0)) {
    return std::nullopt;
  }
  const S inv_det = S(1) / det;
  const Eigen::Vector3<S> tvec = origin - a;
  const S u = tvec.dot(pvec) * inv_det;
  if (u < S(0) || u > S(1)) {
    return std::nullopt;
  }
  const Eigen::Vector3<S> qvec = tvec.cross(e1);
  const S v = direction.dot(qvec) * inv_det;
  if (v < S(0) || u + v > S(1)) {
    return std::nullopt;
  }
  const S t = e2.dot(qvec) * inv_det;
  if (!(t > t_min)) {
    return std::nullopt;
  }
  return TriangleHit<S>{t, Eigen::Vector3<S>(S(1) - u - v, u, v)};
}

/// Entry parameter of a ray into an axis-aligned box, or nullopt on a miss.
template <typename S>
std::optional<S> intersect_ray_box(
    const Eigen::Vector3<S>& origin,
    const Eigen::Vector3<S>& inv_direction,
    const Eigen::AlignedBox<S, 3>& box) {
  S t_enter = S(0);
  S t_exit = std::numeric_limits<S>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::isinf(inv_direction[a])) {
      if (origin[a] < box.min()[a] || origin[a] > box.max()[a]) {
        return std::nullopt;
      }
      continue;
    }
    S t0 = (box.min()[a] - origin[a]) * inv_direction[a];
    S t1 = (box.max()[a] - origin[a]) * inv_direction[a];
    if (t0 > t1) {
      std::swap(t0, t1);
    }
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) {
      return std::nullopt;
    }
  }
  return t_enter;
}

/// Parameter in [0,1] of the point on segment [a,b] closest to p.
template <typename S>
S closest_segment_parameter(const Eigen::Vector3<S>& p, const Eigen::Vector3<S>& a, const Eigen::Vector3<S>& b) {
  const Eigen::Vector3<S> ab = b - a;
  const S len2 = ab.squaredNorm();
  if (len2 == S(0)) {
    return S(0);
  }
  const S t = (p - a).dot(ab) / len2;
  return t < S(0) ? S(0) : (t > S(1) ? S(1) : t);
}

/// Any unit vector orthogonal to `n` (deterministic).
template <typename S>
Eigen::Vector3<S> any_orthogonal(const Eigen::Vector3<S>& n) {
  const Eigen::Vector3<S> helper = std::abs(n.z()) < S(0.9) ? Eigen::Vector3<S>::UnitZ() : Eigen::Vector3<S>::UnitX();
  return n.cross(helper).normalized();
}

template <typename S>
bool is_unit(const Eigen::Vector3<S>& v, S tol = S(1e-6)) {
  return std::abs(v.norm() - S(1)) <= tol;
}

}  // namespace ivc
