#include "ivc/navigation.h"

#include "ivc/error.h"
#include "ivc/geometry.h"

#include <algorithm>
#include <cmath>

namespace ivc {

namespace {

constexpr double kKnifeEdge = 1e-9;

}  // namespace

Vec3 clamp_length(const Vec3& v, double max_len) {
  const double len = v.norm();
  if (len <= max_len || len == 0.0) {
    return v;
  }
  return v * (max_len / len);
}

NavState set_velocity_level(NavState n, int level) {
  if (level < 0 || level >= kVelocityLevels) {
    throw Error(ErrorCode::InvalidLevel, "velocity level must be in 0..4, got " + std::to_string(level));
  }
  n.velocity_level = level;
  return n;
}

double speed_of(const NavState& n, const NavigationConfig& cfg) { return cfg.speeds_mm_s.at(n.velocity_level); }

NavState step(NavState n, Centerline& c, double dt, const NavigationConfig& cfg) {
  if (dt < 0.0) {
    throw Error(ErrorCode::OutOfRange, "negative time step");
  }
  const double distance = speed_of(n, cfg) * dt;
  if (distance == 0.0) {
    return n;
  }
  const double dot = n.facing.dot(tangent_at(c, n.s_mm));
  if (std::abs(dot) >= kKnifeEdge) {
    n.travel_sign = dot >= 0.0 ? 1 : -1;
  }
  const double s_prev = n.s_mm;
  n.s_mm = std::clamp(s_prev + n.travel_sign * distance, 0.0, c.total_length());
  n.head_offset_mm = clamp_length(n.head_offset_mm, cfg.head_radius_fraction * c.radius_at(n.s_mm));
  if (n.s_mm != s_prev) {
    c.mark_visited(std::min(s_prev, n.s_mm), std::max(s_prev, n.s_mm));
  }
  return n;
}

NavState apply_head_pose(NavState n, const Vec3& eye_world, const Vec3& facing, const Centerline& c,
                         const NavigationConfig& cfg) {
  if (!is_unit(facing)) {
    throw Error(ErrorCode::InvalidDirection, "facing must be unit length");
  }
  n.head_offset_mm = clamp_length(eye_world - c.point_at(n.s_mm), cfg.head_radius_fraction * c.radius_at(n.s_mm));
  n.facing = facing;
  return n;
}

TeleportResult teleport(const NavState& n, const Centerline& c, const RayIndex& idx, const Vec3& origin,
                        const Vec3& direction) {
  TeleportResult result{n, idx.intersect(origin, direction)};
  if (result.hit) {
    result.state.s_mm = nearest_on_centerline(c, result.hit->point).s_mm;
    result.state.head_offset_mm = Vec3::Zero();
  }
  return result;
}

}  // namespace ivc
