#include "fixtures.h"

#include "ivc/simulation.h"

#include <doctest.h>

#include <json.hpp>

using namespace ivc;

namespace {

const SessionInputs& inputs() { return fixture::straight_inputs(); }

}  // namespace

TEST_CASE("one run at level 4 takes length over 40 mm/s") {
  const MetricsReport r = run_protocol(inputs(), RunScript::OneRun, 4, GazeMode::Forward);
  const double expected = inputs().centerline.total_length() / 40.0;
  CHECK(std::abs(r.time_consumed_s - expected) <= kTickSeconds);
  CHECK(r.visited_fraction == 1.0);
}

TEST_CASE("two runs take twice as long and cover at least as much") {
  for (GazeMode g : {GazeMode::Forward, GazeMode::Sweep}) {
    const MetricsReport one = run_protocol(inputs(), RunScript::OneRun, 2, g);
    const MetricsReport two = run_protocol(inputs(), RunScript::TwoRun, 2, g);
    CHECK(std::abs(two.time_consumed_s - 2.0 * one.time_consumed_s) <= kTickSeconds);
    CHECK(two.coverage_fraction >= one.coverage_fraction);
    CHECK(two.area_covered_mm2 >= one.area_covered_mm2);
    CHECK(two.visited_fraction == 1.0);
  }
}

TEST_CASE("protocol logs replay to the reported hash") {
  const ProtocolRun run = simulate_protocol(inputs(), RunScript::OneRun, 3, GazeMode::Sweep);
  CHECK(replay(run.log, inputs()).hash == run.report.state_hash);
  CHECK(replay(to_jsonl(run.log), inputs()).hash == run.report.state_hash);
}

TEST_CASE("findings are bookmarked and measured on the way in") {
  PhantomSpec spec = PhantomSpec::straight();
  spec.polyps = {{70.0, 0.0, 3.0, AnomalyClass::Inflammatory}, {140.0, 200.0, 5.0, AnomalyClass::Adenomatous}};
  const Phantom ph = generate_phantom(spec);
  const SessionInputs in = SessionInputs::from_phantom(ph);
  const MetricsReport r = run_protocol(in, RunScript::OneRun, 2, GazeMode::Forward, ph.polyps);
  REQUIRE(r.bookmarks.size() == 2);
  CHECK(r.bookmarks[0].second == AnomalyClass::Inflammatory);
  CHECK(r.bookmarks[1].second == AnomalyClass::Adenomatous);
  CHECK(std::abs(r.bookmarks[0].first - (70.0 - spec.seed_standoff_mm)) <= 2.0);
  REQUIRE(r.measurements_mm.size() == 2);
  CHECK(std::abs(r.measurements_mm[0] - 6.0) <= 2.0);
  CHECK(std::abs(r.measurements_mm[1] - 10.0) <= 2.0);
}

TEST_CASE("report JSON fields") {
  const MetricsReport r = run_protocol(inputs(), RunScript::OneRun, 4, GazeMode::Forward);
  const auto j = nlohmann::json::parse(r.to_json());
  for (const char* key : {"runs", "time_consumed_s", "coverage_fraction", "area_covered_mm2", "total_area_mm2",
                          "visited_fraction", "bookmarks", "bookmark_classes", "measurements_mm", "tau", "t_sat"}) {
    CHECK(j.contains(key));
  }
  for (AnomalyClass c : kAllAnomalyClasses) CHECK(j["bookmark_classes"].contains(std::string(to_string(c))));
  CHECK(j["runs"] == "one_run");
  CHECK(j["coverage_fraction"].get<double>() >= 0.0);
  CHECK(j["coverage_fraction"].get<double>() <= 1.0);
}

TEST_CASE("script and gaze names") {
  CHECK(run_script_from_string("two_run") == RunScript::TwoRun);
  CHECK(gaze_mode_from_string("sweep") == GazeMode::Sweep);
  CHECK_THROWS_AS(run_script_from_string("three_run"), Error);
  CHECK_THROWS_AS(run_protocol(inputs(), RunScript::OneRun, 0, GazeMode::Forward), Error);
}
