#pragma once

#include "ivc/ray_index.h"
#include "ivc/surface.h"
#include "ivc/types.h"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ivc {

inline constexpr double kDefaultSaturationS = 2.0;
inline constexpr double kDefaultCoverageTauS = 0.1;

struct GazeConeConfig {
  int grid = 5;                  // rays per side
  double half_angle_deg = 10.0;  // corner rays sit on the cone boundary
};

struct GazeSample {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();
  double dt = 0.0;
};

/// Per-vertex dwell seconds accumulated from gaze rays.
struct CoverageMap {
  Eigen::VectorXd dwell_s;
  double total_session_s = 0.0;
  Eigen::VectorXd vertex_area_mm2;

  static CoverageMap for_mesh(const Mesh& m);
  double total_area() const { return vertex_area_mm2.sum(); }
  double total_dwell() const { return dwell_s.sum(); }
};

/// Directions of the gaze ray grid around `direction`, in grid order.
std::vector<Vec3> gaze_ray_directions(const Vec3& direction, const GazeConeConfig& cone = {});

/// Splats dt/N per hit ray onto the hit triangle's vertices by barycentric
/// weight. Returns the number of rays that hit.
int accumulate(CoverageMap& cm, const Mesh& m, const RayIndex& idx, const GazeSample& g,
               const GazeConeConfig& cone = {});

using Rgb = std::array<std::uint8_t, 3>;

/// Blue -> green -> red ramp over dwell / t_sat, saturating at 1.
Rgb heat_color(double dwell_s, double t_sat);
std::vector<Rgb> heatmap_colors(const CoverageMap& cm, double t_sat = kDefaultSaturationS);

/// Area share of vertices with dwell >= tau.
double coverage_fraction(const CoverageMap& cm, double tau = kDefaultCoverageTauS);

/// CSV vertex_id,dwell_s.
std::string coverage_csv(const CoverageMap& cm);
/// JSON {total_session_s, coverage_fraction, tau, t_sat}.
std::string coverage_summary_json(const CoverageMap& cm, double tau = kDefaultCoverageTauS,
                                  double t_sat = kDefaultSaturationS);

}  // namespace ivc
