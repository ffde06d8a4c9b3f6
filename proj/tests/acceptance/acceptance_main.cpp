// Headless acceptance run: one PASS/FAIL line per criterion.
#include "../oracles.h"

#include "ivc/annotations.h"
#include "ivc/centerline.h"
#include "ivc/coverage.h"
#include "ivc/distance_transform.h"
#include "ivc/navigation.h"
#include "ivc/phantom.h"
#include "ivc/session.h"
#include "ivc/simulation.h"
#include "ivc/volume.h"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

using namespace ivc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects the first failing detail; the remaining checks still run.
struct Verdict {
  bool ok = true;
  std::string first_failure;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) first_failure = what;
    ok = ok && cond;
  }
};

int failures = 0;

void report(int n, const std::string& title, const Verdict& v, const std::string& detail) {
  std::printf("criterion %d %s: %s  %s%s%s\n", n, v.ok ? "PASS" : "FAIL", title.c_str(), detail.c_str(),
              v.ok ? "" : "  first failure: ", v.first_failure.c_str());
  std::fflush(stdout);
  if (!v.ok) ++failures;
}

void guarded(int n, const std::string& title, const std::function<void(Verdict&, std::string&)>& body) {
  Verdict v;
  std::string detail;
  try {
    body(v, detail);
  } catch (const std::exception& e) {
    v.require(false, std::string("exception: ") + e.what());
  }
  report(n, title, v, detail);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct PhantomCase {
  const char* name;
  Phantom phantom;
  SessionInputs inputs;
};

PhantomCase make_case(const char* name, const PhantomSpec& spec) {
  Phantom ph = generate_phantom(spec);
  SessionInputs in = SessionInputs::from_phantom(ph);
  return {name, std::move(ph), std::move(in)};
}

Vec3 inside_point(const PhantomCase& pc, std::mt19937_64& rng) {
  const Centerline& c = pc.inputs.centerline;
  std::uniform_real_distribution<double> s(0.0, c.total_length());
  const double at = s(rng);
  std::uniform_real_distribution<double> off(-0.5, 0.5);
  return c.point_at(at) + c.radius_at(at) * Vec3(off(rng), off(rng), off(rng));
}

// 1. Exact EDT against the exhaustive scan.
void distance_transform_exactness() {
  guarded(1, "distance transform exactness", [](Verdict& v, std::string& detail) {
    std::mt19937_64 rng(20240501);
    double worst = 0.0, dt_seconds = 0.0;
    const Vec3 spacing = Vec3::Ones();
    for (int m = 0; m < 50; ++m) {
      const LumenMask mask = oracle::random_mask(16, 0.35 + 0.01 * m, rng);
      const auto t0 = Clock::now();
      const DistanceField df = distance_transform(mask, spacing);
      dt_seconds += seconds_since(t0);
      const auto expected = oracle::brute_force_edt(mask, spacing);
      for (std::size_t i = 0; i < expected.size(); ++i) {
        const double err = std::abs(df.values[i] - expected[i]);
        worst = std::max(worst, err);
        v.require(err <= 1e-9, "mask " + std::to_string(m) + " voxel " + std::to_string(i));
      }
    }
    v.require(dt_seconds < 10.0, "runtime");
    detail = "masks=50 max_err=" + fmt("%.3g", worst) + " mm runtime=" + fmt("%.3f", dt_seconds) + " s";
  });
}

// 2. Mid-line against the analytic sweep curve.
void centerline_accuracy() {
  guarded(2, "centerline accuracy", [](Verdict& v, std::string& detail) {
    for (const PhantomSpec& spec : {PhantomSpec::straight(), PhantomSpec::s_curve()}) {
      const Phantom ph = generate_phantom(spec);
      const auto t0 = Clock::now();
      const LumenMask mask = segment_lumen(ph.volume, ph.seed_start);
      const DistanceField df = distance_transform(mask);
      const Centerline c = extract_centerline(mask, df, ph.seed_start, ph.seed_end);
      const double runtime = seconds_since(t0);
      const CenterlineError err = centerline_error(c, ph.curve);
      double chord_lo = 1e300, chord_hi = 0.0;
      for (std::size_t i = 1; i < c.size(); ++i) {
        const double chord = (c.samples()[i] - c.samples()[i - 1]).norm();
        chord_lo = std::min(chord_lo, chord);
        chord_hi = std::max(chord_hi, chord);
      }
      const std::string name = to_string(spec.preset);
      v.require(err.rms_mm <= 0.5, name + " rms");
      v.require(err.max_mm <= 1.5, name + " max");
      v.require(chord_hi - chord_lo <= 1e-6, name + " spacing");
      v.require(runtime < 30.0, name + " runtime");
      detail += name + ": rms=" + fmt("%.3f", err.rms_mm) + " max=" + fmt("%.3f", err.max_mm) +
                " spacing_spread=" + fmt("%.2g", chord_hi - chord_lo) + " runtime=" + fmt("%.2f", runtime) + " s; ";
    }
  });
}

// 3. BVH against the exhaustive triangle scan.
void ray_index_fidelity(const std::vector<const PhantomCase*>& cases) {
  guarded(3, "ray index fidelity", [&](Verdict& v, std::string& detail) {
    std::mt19937_64 rng(3);
    for (const PhantomCase* pc : cases) {
      const Mesh& mesh = pc->inputs.mesh;
      const RayIndex& idx = pc->inputs.index;
      int hits = 0;
      for (int i = 0; i < 1000; ++i) {
        // Mostly lumen origins; every tenth starts outside the body.
        const Vec3 o = i % 10 == 9 ? Vec3(-50.0, 0.0, 0.0) + 20.0 * oracle::random_unit(rng) : inside_point(*pc, rng);
        const Vec3 d = oracle::random_unit(rng);
        const auto a = idx.intersect(o, d);
        const auto b = oracle::scan_ray(mesh, o, d, kRayEpsilonMm);
        const std::string where = std::string(pc->name) + " ray " + std::to_string(i);
        v.require(a.has_value() == b.has_value(), where + " hit/miss");
        if (!a || !b) continue;
        ++hits;
        v.require(a->triangle_index == b->triangle, where + " triangle");
        v.require(std::abs(a->distance_mm - b->t) <= 1e-6, where + " distance");
      }
      detail += std::string(pc->name) + ": 1000 rays, " + std::to_string(hits) + " hits; ";
    }
  });
}

// 4. Dwell conservation and replay determinism.
void coverage_conservation(const PhantomCase& closed_tube, const PhantomCase& screening) {
  guarded(4, "coverage conservation", [&](Verdict& v, std::string& detail) {
    // All-hit script: random gaze from inside a closed tube.
    Session s(closed_tube.inputs);
    s.apply_now(EventKind::StartAt, RayPayload{{closed_tube.inputs.centerline.point_at(40.0), Vec3::UnitY()}});
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> level(0, 4);
    for (int i = 0; i < 20 * kTickHz; ++i) {
      if (i % 36 == 0) s.apply_now(EventKind::Velocity, VelocityPayload{level(rng) % 3});
      s.apply_now(EventKind::Gaze, GazePayload{oracle::random_unit(rng)});
      s.tick();
    }
    s.finish();
    const double total = s.state().coverage.total_session_s;
    const double dwell = s.state().coverage.total_dwell();
    v.require(std::abs(dwell - total) <= 1e-9 * total, "all-hit equality");
    const auto r1 = replay(s.log(), closed_tube.inputs);
    const auto r2 = replay(to_jsonl(s.log()), closed_tube.inputs);
    v.require(r1.hash == s.state_hash() && r2.hash == r1.hash, "all-hit replay hash");
    detail += "all-hit: dwell=" + fmt("%.12f", dwell) + " total=" + fmt("%.12f", total) + "; ";

    // Protocol sessions with a sweeping gaze.
    for (RunScript script : {RunScript::OneRun, RunScript::TwoRun}) {
      const ProtocolRun run = simulate_protocol(screening.inputs, script, 3, GazeMode::Sweep);
      const auto a = replay(run.log, screening.inputs);
      const auto b = replay(run.log, screening.inputs);
      const double t = a.state.coverage.total_session_s;
      const double d = a.state.coverage.total_dwell();
      v.require(d <= t * (1.0 + 1e-12), std::string(to_string(script)) + " dwell bound");
      v.require(a.hash == b.hash && a.hash == run.report.state_hash, std::string(to_string(script)) + " replay");
      char hex[32];
      std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(a.hash));
      detail += std::string(to_string(script)) + ": dwell=" + fmt("%.4f", d) + " <= total=" + fmt("%.4f", t) +
                " hash=" + hex + " x2; ";
    }
  });
}

// 5. Navigation semantics on the S-curve mid-line.
void navigation_semantics(const PhantomCase& pc) {
  guarded(5, "navigation semantics", [&](Verdict& v, std::string& detail) {
    Centerline c = pc.inputs.centerline;
    const double dt = kTickSeconds;
    for (int level = 1; level <= 4; ++level) {
      NavState n = set_velocity_level(NavState{}, level);
      const double speed = speed_of(n);
      n.s_mm = 0.5 * c.total_length();
      n.facing = tangent_at(c, n.s_mm);
      const NavState fwd = step(n, c, dt);
      v.require(fwd.s_mm == n.s_mm + speed * dt, "forward level " + std::to_string(level));
      n.facing = -tangent_at(c, n.s_mm);
      const NavState back = step(n, c, dt);
      v.require(back.s_mm == n.s_mm - speed * dt, "backward level " + std::to_string(level));
      v.require(back.travel_sign == -fwd.travel_sign, "facing flip level " + std::to_string(level));
    }

    const LumenMask mask = segment_lumen(pc.phantom.volume, pc.phantom.seed_start);
    NavState n;
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> kind(0, 3), level(0, 4);
    std::uniform_real_distribution<double> u(-40.0, 40.0), step_dt(0.0, 0.2);
    int teleports = 0;
    for (int i = 0; i < 10000; ++i) {
      switch (kind(rng)) {
        case 0:
          n = set_velocity_level(n, level(rng));
          break;
        case 1:
          n = apply_head_pose(n, n.eye_position(c) + Vec3(u(rng), u(rng), u(rng)), oracle::random_unit(rng), c);
          break;
        case 2: {
          const Vec3 o = n.eye_position(c);
          const Vec3 d = oracle::random_unit(rng);
          const TeleportResult r = teleport(n, c, pc.inputs.index, o, d);
          if (r.hit) {
            ++teleports;
            v.require(r.state.s_mm == nearest_on_centerline(c, r.hit->point).s_mm, "teleport s");
          }
          n = r.state;
          break;
        }
        default:
          n = step(n, c, step_dt(rng));
          break;
      }
      const Vec3 eye = n.eye_position(c);
      const Vec3i vox = mask.grid.nearest_voxel(eye);
      v.require(mask.grid.contains(vox) && mask.at(vox), "eye outside lumen at event " + std::to_string(i));
      v.require(n.s_mm >= 0.0 && n.s_mm <= c.total_length(), "s out of range");
    }
    detail = "exact steps at levels 1-4, 10000 random events, " + std::to_string(teleports) + " teleports";
  });
}

// 6 and 7 share the screening runs.
void protocol_and_measurement(const PhantomCase& pc) {
  MetricsReport one, two;
  double one_fine = 0.0, two_fine = 0.0;  // informational, tau = 1 ms
  std::string run_error;
  try {
    const ProtocolRun r1 = simulate_protocol(pc.inputs, RunScript::OneRun, 2, GazeMode::Sweep, pc.phantom.polyps);
    const ProtocolRun r2 = simulate_protocol(pc.inputs, RunScript::TwoRun, 2, GazeMode::Sweep, pc.phantom.polyps);
    one = r1.report;
    two = r2.report;
    one_fine = coverage_fraction(replay(r1.log, pc.inputs).state.coverage, 1e-3);
    two_fine = coverage_fraction(replay(r2.log, pc.inputs).state.coverage, 1e-3);
  } catch (const std::exception& e) {
    run_error = e.what();
  }

  guarded(6, "protocol metrics", [&](Verdict& v, std::string& detail) {
    if (!run_error.empty()) throw std::runtime_error(run_error);
    const double length = pc.inputs.centerline.total_length();
    const double expected = length / 10.0;
    v.require(two.coverage_fraction >= one.coverage_fraction, "two_run coverage below one_run");
    v.require(one.visited_fraction == 1.0, "one_run visited fraction");
    v.require(std::abs(one.time_consumed_s - expected) <= kTickSeconds, "one_run time");
    const auto j = nlohmann::json::parse(one.to_json());
    for (const char* key : {"time_consumed_s", "area_covered_mm2", "coverage_fraction", "visited_fraction",
                            "bookmarks", "bookmark_classes", "measurements_mm"}) {
      v.require(j.contains(key), std::string("missing ") + key);
    }
    for (AnomalyClass c : kAllAnomalyClasses) {
      v.require(j.contains("bookmark_classes") && j["bookmark_classes"].contains(std::string(to_string(c))),
                std::string("class ") + std::string(to_string(c)));
    }
    detail = "coverage one=" + fmt("%.6f", one.coverage_fraction) + " two=" + fmt("%.6f", two.coverage_fraction) +
             " (tau=" + fmt("%g", one.tau_s) + " s; at 1 ms one=" + fmt("%.4f", one_fine) + " two=" +
             fmt("%.4f", two_fine) + ")" +
             " visited=" + fmt("%.3f", one.visited_fraction) + " time=" + fmt("%.4f", one.time_consumed_s) +
             " s expected=" + fmt("%.4f", expected) + " s bookmarks=" + std::to_string(one.bookmarks.size());
  });

  guarded(7, "measurement accuracy", [&](Verdict& v, std::string& detail) {
    if (!run_error.empty()) throw std::runtime_error(run_error);
    const double tol = 2.0 * pc.phantom.spec.spacing_mm;
    v.require(one.measurements_mm.size() == pc.phantom.polyps.size(), "measurement count");
    for (std::size_t i = 0; i < pc.phantom.polyps.size() && i < one.measurements_mm.size(); ++i) {
      const double truth = pc.phantom.polyps[i].base_diameter_mm;
      const double got = one.measurements_mm[i];
      v.require(std::abs(got - truth) <= tol, "polyp " + std::to_string(i));
      detail += fmt("%.0f", truth) + "->" + fmt("%.3f", got) + " ";
    }
    detail += "(tol " + fmt("%.1f", tol) + " mm)";
  });
}

// 8. Slices against direct voxel lookup.
void slice_correctness(const PhantomCase& pc) {
  guarded(8, "slice correctness", [&](Verdict& v, std::string& detail) {
    const Volume& vol = pc.inputs.volume;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> c(-1100.0, 400.0), w(1.0, 2500.0);
    std::uniform_int_distribution<int> plane(0, 2);
    const Vec3 lo = vol.grid.voxel_center(Vec3i::Zero());
    const Vec3 hi = vol.grid.voxel_center(vol.grid.dims - Vec3i::Ones());
    std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y()), uz(lo.z(), hi.z());
    for (int i = 0; i < 100; ++i) {
      const Vec3 p(ux(rng), uy(rng), uz(rng));
      const double center = c(rng), width = w(rng);
      const auto pl = static_cast<SlicePlane>(plane(rng));
      const SliceImage img = extract_slice(vol, p, pl, center, width);
      const Vec3i k = vol.grid.nearest_voxel(p);
      const double expected = window_intensity<double>(vol.at(k), center, width);
      const double got = img.pixels(img.crosshair.x(), img.crosshair.y());
      v.require(got == expected, "point " + std::to_string(i));
      const int index = pl == SlicePlane::Axial ? k.z() : pl == SlicePlane::Coronal ? k.y() : k.x();
      v.require(img.index == index, "index at point " + std::to_string(i));
      v.require(window_intensity<double>(center - width / 2.0, center, width) == 0.0, "low endpoint");
      v.require(window_intensity<double>(center + width / 2.0, center, width) == 1.0, "high endpoint");
    }
    detail = "100 points, random planes and windows";
  });
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  distance_transform_exactness();
  centerline_accuracy();

  PhantomSpec screening_spec = PhantomSpec::s_curve();
  screening_spec.polyps = screening_polyps();
  const PhantomCase straight = make_case("straight", PhantomSpec::straight());
  const PhantomCase s_curve = make_case("s_curve", PhantomSpec::s_curve());
  const PhantomCase screening = make_case("s_curve+polyps", screening_spec);

  ray_index_fidelity({&straight, &s_curve, &screening});
  coverage_conservation(straight, screening);
  navigation_semantics(s_curve);
  protocol_and_measurement(screening);
  slice_correctness(screening);

  std::printf("%d of 8 criteria failed, %.1f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
