#pragma once

#include "ivc/centerline.h"
#include "ivc/ray_index.h"
#include "ivc/types.h"

#include <array>
#include <optional>

namespace ivc {

inline constexpr int kVelocityLevels = 5;

struct NavigationConfig {
  /// mm/s for velocity levels 0..4.
  std::array<double, kVelocityLevels> speeds_mm_s = {0.0, 5.0, 10.0, 20.0, 40.0};
  /// Eye may leave the mid-line by at most this fraction of the local radius.
  double head_radius_fraction = 0.8;
};

struct NavState {
  double s_mm = 0.0;
  int velocity_level = 0;
  Vec3 facing = Vec3::UnitX();
  Vec3 head_offset_mm = Vec3::Zero();
  /// Direction of travel from the previous frame (+1 forward, -1 back).
  int travel_sign = 1;

  Vec3 eye_position(const Centerline& c) const { return c.point_at(s_mm) + head_offset_mm; }
};

NavState set_velocity_level(NavState n, int level);
double speed_of(const NavState& n, const NavigationConfig& cfg = {});

/// Advances along the mid-line tangent; looking back (facing . tangent < 0)
/// reverses the direction. Marks the traversed interval visited.
NavState step(NavState n, Centerline& c, double dt, const NavigationConfig& cfg = {});

NavState apply_head_pose(NavState n, const Vec3& eye_world, const Vec3& facing, const Centerline& c,
                         const NavigationConfig& cfg = {});

struct TeleportResult {
  NavState state;
  std::optional<RayHit> hit;  // nullopt when the ray missed
};

/// Moves to the mid-line station closest to the first surface hit.
TeleportResult teleport(const NavState& n, const Centerline& c, const RayIndex& idx, const Vec3& origin,
                        const Vec3& direction);

/// Offset limited to `max_len`, direction preserved.
Vec3 clamp_length(const Vec3& v, double max_len);

}  // namespace ivc
