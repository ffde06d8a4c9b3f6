#include "ivc/coverage.h"

#include "ivc/error.h"
#include "ivc/geometry.h"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace ivc {

CoverageMap CoverageMap::for_mesh(const Mesh& m) {
  CoverageMap cm;
  cm.dwell_s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.vertex_count()));
  cm.vertex_area_mm2 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.vertex_count()));
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const double third = m.triangle_area(t) / 3.0;
    for (int c = 0; c < 3; ++c) {
      cm.vertex_area_mm2[m.triangles[t][c]] += third;
    }
  }
  return cm;
}

std::vector<Vec3> gaze_ray_directions(const Vec3& direction, const GazeConeConfig& cone) {
  const Vec3 u = any_orthogonal<double>(direction);
  const Vec3 v = direction.cross(u);
  // Square grid inscribed in the cone: corners lie on the boundary.
  const double half_side = std::tan(cone.half_angle_deg * std::numbers::pi / 180.0) / std::sqrt(2.0);
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(cone.grid * cone.grid));
  for (int j = 0; j < cone.grid; ++j) {
    for (int i = 0; i < cone.grid; ++i) {
      const double a = cone.grid > 1 ? (2.0 * i / (cone.grid - 1) - 1.0) * half_side : 0.0;
      const double b = cone.grid > 1 ? (2.0 * j / (cone.grid - 1) - 1.0) * half_side : 0.0;
      dirs.push_back((direction + a * u + b * v).normalized());
    }
  }
  return dirs;
}

int accumulate(CoverageMap& cm, const Mesh& m, const RayIndex& idx, const GazeSample& g, const GazeConeConfig& cone) {
  if (!is_unit(g.direction)) {
    throw Error(ErrorCode::InvalidDirection, "gaze direction must be unit length");
  }
  if (g.dt < 0.0) {
    throw Error(ErrorCode::OutOfRange, "negative gaze duration");
  }
  const auto dirs = gaze_ray_directions(g.direction, cone);
  const double share = g.dt / static_cast<double>(dirs.size());
  int hits = 0;
  for (const auto& d : dirs) {
    const auto hit = idx.intersect(g.origin, d);
    if (!hit) continue;
    ++hits;
    const auto& tri = m.triangles[static_cast<std::size_t>(hit->triangle_index)];
    for (int c = 0; c < 3; ++c) {
      cm.dwell_s[tri[c]] += share * hit->barycentric[c];
    }
  }
  cm.total_session_s += g.dt;
  return hits;
}

Rgb heat_color(double dwell_s, double t_sat) {
  if (!(t_sat > 0.0)) {
    throw Error(ErrorCode::InvalidSaturation, "saturation time must be positive");
  }
  const double u = std::clamp(dwell_s / t_sat, 0.0, 1.0);
  auto byte = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(x, 0.0, 1.0))); };
  if (u <= 0.5) {
    return {0, byte(2.0 * u), byte(1.0 - 2.0 * u)};
  }
  return {byte(2.0 * u - 1.0), byte(2.0 - 2.0 * u), 0};
}

std::vector<Rgb> heatmap_colors(const CoverageMap& cm, double t_sat) {
  if (!(t_sat > 0.0)) {
    throw Error(ErrorCode::InvalidSaturation, "saturation time must be positive");
  }
  std::vector<Rgb> colors(static_cast<std::size_t>(cm.dwell_s.size()));
  for (Eigen::Index i = 0; i < cm.dwell_s.size(); ++i) {
    colors[static_cast<std::size_t>(i)] = heat_color(cm.dwell_s[i], t_sat);
  }
  return colors;
}

double coverage_fraction(const CoverageMap& cm, double tau) {
  const double total = cm.total_area();
  if (total <= 0.0) return 0.0;
  const double covered = (cm.dwell_s.array() >= tau).select(cm.vertex_area_mm2.array(), 0.0).sum();
  return std::clamp(covered / total, 0.0, 1.0);
}

std::string coverage_csv(const CoverageMap& cm) {
  std::ostringstream out;
  out.precision(17);
  out << "vertex_id,dwell_s\n";
  for (Eigen::Index i = 0; i < cm.dwell_s.size(); ++i) {
    out << i << ',' << cm.dwell_s[i] << '\n';
  }
  return out.str();
}

std::string coverage_summary_json(const CoverageMap& cm, double tau, double t_sat) {
  nlohmann::json j;
  j["total_session_s"] = cm.total_session_s;
  j["coverage_fraction"] = coverage_fraction(cm, tau);
  j["tau"] = tau;
  j["t_sat"] = t_sat;
  return j.dump(2);
}

}  // namespace ivc
