#include "ivc/simulation.h"

#include "ivc/error.h"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

namespace ivc {

namespace {

// Clearance beyond the base rim from which the measuring rays are cast.
constexpr double kRimClearanceMm = 3.0;

Vec3 sweep_direction(const Vec3& forward, double t) {
  const double angle = kSweepAmplitudeDeg * std::numbers::pi / 180.0 *
      std::sin(2.0 * std::numbers::pi * kSweepFrequencyHz * t);
  Vec3 side = forward.cross(Vec3::UnitZ());
  if (side.norm() < 1e-6) side = forward.cross(Vec3::UnitY());
  side.normalize();
  return (std::cos(angle) * forward + std::sin(angle) * side).normalized();
}

struct FindingProgress {
  bool bookmarked = false;
  bool measured_a = false;
  bool measured_b = false;
};

}  // namespace

const char* to_string(RunScript r) { return r == RunScript::OneRun ? "one_run" : "two_run"; }
const char* to_string(GazeMode g) { return g == GazeMode::Forward ? "forward" : "sweep"; }

RunScript run_script_from_string(const std::string& name) {
  if (name == "one_run") return RunScript::OneRun;
  if (name == "two_run") return RunScript::TwoRun;
  throw Error(ErrorCode::InvalidSpec, "unknown protocol '" + name + "'");
}

GazeMode gaze_mode_from_string(const std::string& name) {
  if (name == "forward") return GazeMode::Forward;
  if (name == "sweep") return GazeMode::Sweep;
  throw Error(ErrorCode::InvalidSpec, "unknown gaze mode '" + name + "'");
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["runs"] = to_string(runs);
  j["time_consumed_s"] = time_consumed_s;
  j["coverage_fraction"] = coverage_fraction;
  j["area_covered_mm2"] = area_covered_mm2;
  j["total_area_mm2"] = total_area_mm2;
  j["visited_fraction"] = visited_fraction;
  j["tau"] = tau_s;
  j["t_sat"] = t_sat_s;
  nlohmann::json marks = nlohmann::json::array();
  std::map<std::string, int> counts;
  for (auto c : kAllAnomalyClasses) counts[std::string(ivc::to_string(c))] = 0;
  for (const auto& [s, c] : bookmarks) {
    marks.push_back({{"s_mm", s}, {"class", std::string(ivc::to_string(c))}});
    ++counts[std::string(ivc::to_string(c))];
  }
  j["bookmarks"] = marks;
  j["bookmark_classes"] = counts;
  j["measurements_mm"] = measurements_mm;
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(state_hash));
  j["state_hash"] = hex;
  return j.dump(2);
}

MetricsReport make_report(const Session& session, RunScript runs) {
  const SessionState& s = session.state();
  const auto& cfg = session.inputs().config;
  MetricsReport r;
  r.runs = runs;
  r.time_consumed_s = s.started ? static_cast<double>(s.tick - s.start_tick) * kTickSeconds : 0.0;
  r.coverage_fraction = coverage_fraction(s.coverage, cfg.tau_s);
  r.total_area_mm2 = s.coverage.total_area();
  r.area_covered_mm2 = r.coverage_fraction * r.total_area_mm2;
  r.visited_fraction = s.centerline.visited_fraction();
  for (const auto& b : s.annotations.bookmarks()) r.bookmarks.emplace_back(b.s_mm, b.anomaly);
  for (const auto& m : s.annotations.measurements()) r.measurements_mm.push_back(m.distance_mm);
  r.tau_s = cfg.tau_s;
  r.t_sat_s = cfg.t_sat_s;
  r.state_hash = session.state_hash();
  return r;
}

ProtocolRun simulate_protocol(const SessionInputs& inputs, RunScript script, int level, GazeMode gaze,
                              const std::vector<PolypTruth>& findings) {
  if (level < 1 || level >= kVelocityLevels) {
    throw Error(ErrorCode::InvalidLevel, "protocol level must be in 1..4");
  }
  Session session(inputs);
  const Centerline& line = inputs.centerline;
  const double length = line.total_length();

  // Enter at the rectum end: point back along the mid-line at the end cap.
  const Vec3 start = line.point_at(0.0);
  const Vec3 back = -tangent_at(line, 0.0);
  const auto started = session.apply_now(EventKind::StartAt, RayPayload{{start, back}});
  if (!started.accepted) {
    throw Error(started.error.value_or(ErrorCode::RayMiss), "cannot enter the colon: " + started.reason);
  }
  session.apply_now(EventKind::Velocity, VelocityPayload{level});

  std::vector<FindingProgress> progress(findings.size());
  bool returning = false;
  const double t0 = session.time();
  while (true) {
    const SessionState& st = session.state();
    const double s = st.nav.s_mm;
    if (!returning && s >= length) {
      if (script == RunScript::OneRun) break;
      returning = true;
    }
    if (returning && s <= 0.0) break;

    const Vec3 tangent = tangent_at(line, s);
    const Vec3 facing = returning ? Vec3(-tangent) : tangent;
    const Vec3 eye = line.point_at(s);
    session.apply_now(EventKind::HeadPose, HeadPosePayload{eye, facing});
    const Vec3 look = gaze == GazeMode::Sweep ? sweep_direction(facing, session.time() - t0) : facing;
    session.apply_now(EventKind::Gaze, GazePayload{look});

    if (!returning) {
      for (std::size_t i = 0; i < findings.size(); ++i) {
        const PolypTruth& f = findings[i];
        const double rim = 0.5 * f.base_diameter_mm;
        auto toward = [&](const Vec3& target) { return Ray{eye, (target - eye).normalized()}; };
        if (!progress[i].measured_a && s >= f.s_mm - rim - kRimClearanceMm) {
          session.apply_now(EventKind::PointMeasureA, RayPayload{toward(f.base_points[0])});
          progress[i].measured_a = true;
        }
        if (!progress[i].bookmarked && s >= f.s_mm) {
          session.apply_now(EventKind::PointBookmark,
                            BookmarkPayload{toward(f.apex), f.anomaly, "planted polyp " + std::to_string(i + 1)});
          progress[i].bookmarked = true;
        }
        if (progress[i].measured_a && !progress[i].measured_b && s >= f.s_mm + rim + kRimClearanceMm) {
          session.apply_now(EventKind::PointMeasureB, RayPayload{toward(f.base_points[1])});
          progress[i].measured_b = true;
        }
      }
    }
    session.tick();
  }
  session.finish();
  return {make_report(session, script), session.log()};
}

MetricsReport run_protocol(const SessionInputs& inputs, RunScript script, int level, GazeMode gaze,
                           const std::vector<PolypTruth>& findings) {
  return simulate_protocol(inputs, script, level, gaze, findings).report;
}

}  // namespace ivc
