#pragma once

#include "ivc/annotations.h"
#include "ivc/phantom.h"
#include "ivc/session.h"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ivc {

enum class RunScript { OneRun, TwoRun };
enum class GazeMode { Forward, Sweep };

const char* to_string(RunScript r);
const char* to_string(GazeMode g);
RunScript run_script_from_string(const std::string& name);
GazeMode gaze_mode_from_string(const std::string& name);

inline constexpr double kSweepAmplitudeDeg = 30.0;
inline constexpr double kSweepFrequencyHz = 0.5;

struct MetricsReport {
  RunScript runs = RunScript::OneRun;
  double time_consumed_s = 0.0;
  double coverage_fraction = 0.0;
  double area_covered_mm2 = 0.0;
  double total_area_mm2 = 0.0;
  double visited_fraction = 0.0;
  std::vector<std::pair<double, AnomalyClass>> bookmarks;  // (s_mm, class)
  std::vector<double> measurements_mm;
  double tau_s = kDefaultCoverageTauS;
  double t_sat_s = kDefaultSaturationS;
  std::uint64_t state_hash = 0;

  std::string to_json() const;
};

MetricsReport make_report(const Session& session, RunScript runs);

struct ProtocolRun {
  MetricsReport report;
  std::vector<LogEntry> log;
};

/// Scripted reading: start at the rectum end, fly to the cecum end (and
/// back for two_run), gazing forward or sweeping +-30 deg at 0.5 Hz.
/// Known findings are bookmarked and their base measured on the way in.
ProtocolRun simulate_protocol(const SessionInputs& inputs, RunScript script, int level, GazeMode gaze,
                              const std::vector<PolypTruth>& findings = {});

MetricsReport run_protocol(const SessionInputs& inputs, RunScript script, int level, GazeMode gaze,
                           const std::vector<PolypTruth>& findings = {});

}  // namespace ivc
