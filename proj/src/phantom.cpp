#include "ivc/phantom.h"

#include "ivc/error.h"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ivc {

namespace {

using nlohmann::json;

constexpr double kTableStepMm = 0.005;
constexpr double kCoarseStepMm = 0.5;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace

const char* to_string(PhantomPreset p) { return p == PhantomPreset::Straight ? "straight" : "s_curve"; }

PhantomPreset phantom_preset_from_string(const std::string& name) {
  if (name == "straight") return PhantomPreset::Straight;
  if (name == "s_curve") return PhantomPreset::SCurve;
  throw Error(ErrorCode::InvalidSpec, "unknown phantom preset '" + name + "'");
}

PhantomSpec PhantomSpec::straight() { return PhantomSpec{}; }

PhantomSpec PhantomSpec::s_curve() {
  PhantomSpec s;
  s.preset = PhantomPreset::SCurve;
  s.length_mm = 300.0;
  return s;
}

std::vector<PolypSpec> screening_polyps() {
  return {
      {75.0, 90.0, 2.0, AnomalyClass::Adenomatous},
      {150.0, 270.0, 4.0, AnomalyClass::Serrated},
      {225.0, 90.0, 6.0, AnomalyClass::VillousAdenoma},
  };
}

void PhantomSpec::validate() const {
  if (!(length_mm > 0.0) || !(radius_mm > 0.0) || !(spacing_mm > 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "length, radius and spacing must be positive");
  }
  if (preset == PhantomPreset::SCurve && !(period_mm > 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "s_curve period must be positive");
  }
  if (margin_voxels < 1) {
    throw Error(ErrorCode::InvalidSpec, "margin must be at least one voxel");
  }
  for (const auto& p : polyps) {
    if (!(p.radius_mm > 0.0) || p.radius_mm >= radius_mm) {
      throw Error(ErrorCode::InvalidSpec, "polyp radius must be positive and below the tube radius");
    }
    if (p.s_mm < 0.0 || p.s_mm > length_mm) {
      throw Error(ErrorCode::InvalidSpec, "polyp station outside the tube");
    }
    if (2.0 * p.radius_mm / spacing_mm < 4.0) {
      throw Error(ErrorCode::UnresolvablePolyp, "polyp of diameter " + std::to_string(2.0 * p.radius_mm) +
                                                    " mm spans fewer than 4 voxels at spacing " +
                                                    std::to_string(spacing_mm) + " mm");
    }
  }
}

SweepCurve::SweepCurve(const PhantomSpec& spec) : preset_(spec.preset), length_(spec.length_mm) {
  if (preset_ == PhantomPreset::Straight) {
    return;
  }
  amplitude_ = spec.amplitude_mm;
  wavenumber_ = 2.0 * std::numbers::pi / spec.period_mm;
  table_step_ = kTableStepMm;
  // Arc length by Simpson's rule on each table interval, until the target length is covered.
  arc_table_.push_back(0.0);
  auto speed = [&](double t) { return derivative_param(t).norm(); };
  while (arc_table_.back() < length_) {
    const double t0 = (arc_table_.size() - 1) * table_step_;
    const double t1 = t0 + table_step_;
    const double seg = table_step_ / 6.0 * (speed(t0) + 4.0 * speed(0.5 * (t0 + t1)) + speed(t1));
    arc_table_.push_back(arc_table_.back() + seg);
  }
  for (double s = 0.0;; s += kCoarseStepMm) {
    const double ss = std::min(s, length_);
    coarse_.emplace_back(ss, point(ss));
    if (ss >= length_) break;
  }
}

Vec3 SweepCurve::point_param(double t) const {
  if (preset_ == PhantomPreset::Straight) return {t, 0.0, 0.0};
  return {t, amplitude_ * std::sin(wavenumber_ * t), 0.0};
}

Vec3 SweepCurve::derivative_param(double t) const {
  if (preset_ == PhantomPreset::Straight) return Vec3::UnitX();
  return {1.0, amplitude_ * wavenumber_ * std::cos(wavenumber_ * t), 0.0};
}

double SweepCurve::param_at(double s) const {
  if (preset_ == PhantomPreset::Straight) return s;
  s = std::clamp(s, 0.0, length_);
  const auto it = std::upper_bound(arc_table_.begin(), arc_table_.end(), s);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - arc_table_.begin()), arc_table_.size() - 1);
  const std::size_t lo = i == 0 ? 0 : i - 1;
  const double span = arc_table_[lo + 1] - arc_table_[lo];
  double t = (lo + (s - arc_table_[lo]) / span) * table_step_;
  // One Newton step on s(t) - s with the local Simpson estimate of s(t).
  const double t_lo = lo * table_step_;
  const double mid = 0.5 * (t_lo + t);
  const double s_t = arc_table_[lo] + (t - t_lo) / 6.0 *
      (derivative_param(t_lo).norm() + 4.0 * derivative_param(mid).norm() + derivative_param(t).norm());
  t -= (s_t - s) / derivative_param(t).norm();
  return t;
}

Vec3 SweepCurve::point(double s) const { return point_param(param_at(s)); }

Vec3 SweepCurve::tangent(double s) const { return derivative_param(param_at(s)).normalized(); }

Vec3 SweepCurve::radial(double s, double azimuth_deg) const {
  const Vec3 t = tangent(s);
  const Vec3 b = Vec3::UnitZ();
  const Vec3 n = b.cross(t).normalized();
  const double a = azimuth_deg * std::numbers::pi / 180.0;
  return std::cos(a) * n + std::sin(a) * b;
}

SweepCurve::Nearest SweepCurve::nearest(const Vec3& p, double cutoff) const {
  if (preset_ == PhantomPreset::Straight) {
    const double s = std::clamp(p.x(), 0.0, length_);
    return {s, (p - point(s)).norm()};
  }
  auto dist = [&](double s) { return (p - point(s)).norm(); };
  // x grows monotonically with s, so |dx| bounds the distance from below.
  const auto by_x = [](const std::pair<double, Vec3>& c, double x) { return c.second.x() < x; };
  auto it = std::lower_bound(coarse_.begin(), coarse_.end(), p.x(), by_x);
  if (it == coarse_.end()) --it;
  double best_s = it->first;
  double best_d = (p - it->second).norm();
  auto first = std::lower_bound(coarse_.begin(), coarse_.end(), p.x() - best_d, by_x);
  for (; first != coarse_.end() && first->second.x() <= p.x() + best_d; ++first) {
    const double d = (p - first->second).norm();
    if (d < best_d) {
      best_d = d;
      best_s = first->first;
    }
  }
  // Every curve point lies within half a coarse step of a sample.
  if (best_d - 0.5 * kCoarseStepMm > cutoff) return {best_s, best_d};
  // Golden-section refinement around the coarse minimum.
  double lo = std::max(0.0, best_s - kCoarseStepMm);
  double hi = std::min(length_, best_s + kCoarseStepMm);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - phi * (hi - lo);
  double x2 = lo + phi * (hi - lo);
  double f1 = dist(x1);
  double f2 = dist(x2);
  for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = dist(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = dist(x2);
    }
  }
  const double s = 0.5 * (lo + hi);
  const double d = dist(s);
  if (d < best_d) return {s, d};
  return {best_s, best_d};
}

std::vector<Vec3> SweepCurve::sample(double step) const {
  std::vector<Vec3> out;
  const auto n = static_cast<int>(std::floor(length_ / step + 1e-9));
  for (int i = 0; i <= n; ++i) out.push_back(point(i * step));
  if (length_ - n * step > 1e-9) out.push_back(point(length_));
  return out;
}

namespace {

struct Bump {
  Vec3 center;
  double radius;
};

// Everything but the voxel values: grid, curve, polyp truth and seeds.
Phantom layout(const PhantomSpec& spec) {
  spec.validate();
  Phantom ph;
  ph.spec = spec;
  ph.curve = SweepCurve(spec);
  const SweepCurve& curve = ph.curve;
  const double r = spec.radius_mm;
  const double h = spec.spacing_mm;

  // Extent of the union of normal discs, sampled densely.
  Eigen::AlignedBox3d extent;
  for (double s = 0.0;; s += 0.25) {
    const double ss = std::min(s, curve.length());
    const Vec3 c = curve.point(ss);
    const Vec3 n = curve.radial(ss, 0.0);
    const Vec3 b = curve.radial(ss, 90.0);
    for (int k = 0; k < 36; ++k) {
      const double a = k * std::numbers::pi / 18.0;
      extent.extend(c + r * (std::cos(a) * n + std::sin(a) * b));
    }
    if (ss >= curve.length()) break;
  }

  Grid& g = ph.volume.grid;
  g.spacing_mm = Vec3::Constant(h);
  Vec3i lo;
  Vec3i hi;
  for (int a = 0; a < 3; ++a) {
    lo[a] = static_cast<int>(std::floor(extent.min()[a] / h)) - spec.margin_voxels;
    hi[a] = static_cast<int>(std::ceil(extent.max()[a] / h)) + spec.margin_voxels;
  }
  g.origin_mm = lo.cast<double>() * h;
  g.dims = hi - lo + Vec3i::Ones();

  for (const auto& p : spec.polyps) {
    PolypTruth t;
    const Vec3 radial = curve.radial(p.s_mm, p.azimuth_deg);
    t.base_center = curve.point(p.s_mm) + r * radial;
    t.apex = t.base_center - p.radius_mm * radial;
    t.base_diameter_mm = 2.0 * p.radius_mm;
    t.s_mm = p.s_mm;
    t.azimuth_deg = p.azimuth_deg;
    t.anomaly = p.anomaly;
    const Vec3 axial = curve.tangent(p.s_mm);
    t.base_points = {t.base_center - p.radius_mm * axial, t.base_center + p.radius_mm * axial};
    ph.polyps.push_back(t);
  }
  ph.seed_start = curve.point(std::min(spec.seed_standoff_mm, curve.length()));
  ph.seed_end = curve.point(std::max(curve.length() - spec.seed_standoff_mm, 0.0));
  return ph;
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
  Phantom ph = layout(spec);
  const SweepCurve& curve = ph.curve;
  const double r = spec.radius_mm;
  const Grid& g = ph.volume.grid;
  ph.volume.voxels.assign(g.voxel_count(), spec.body_hu);
  std::vector<Bump> bumps;
  for (const auto& t : ph.polyps) bumps.push_back({t.base_center, t.base_diameter_mm / 2.0});

  for (int k = 0; k < g.dims.z(); ++k) {
    for (int j = 0; j < g.dims.y(); ++j) {
      for (int i = 0; i < g.dims.x(); ++i) {
        const Vec3 p = g.voxel_center({i, j, k});
        const auto near = curve.nearest(p, r);
        if (near.distance_mm > r) continue;
        // Off the normal disc means the nearest point is an end, beyond its cap.
        if (std::abs((p - curve.point(near.s_mm)).dot(curve.tangent(near.s_mm))) > 1e-6) continue;
        const bool in_bump = std::any_of(bumps.begin(), bumps.end(), [&](const Bump& b) {
          return (p - b.center).squaredNorm() <= b.radius * b.radius;
        });
        if (!in_bump) ph.volume.voxels[g.linear(i, j, k)] = spec.air_hu;
      }
    }
  }
  return ph;
}

CenterlineError centerline_error(const std::vector<Vec3>& computed, const SweepCurve& analytic) {
  CenterlineError e;
  if (computed.empty()) return e;
  double sum2 = 0.0;
  for (const auto& p : computed) {
    const double d = analytic.nearest(p).distance_mm;
    sum2 += d * d;
    e.max_mm = std::max(e.max_mm, d);
  }
  e.rms_mm = std::sqrt(sum2 / computed.size());
  return e;
}

CenterlineError centerline_error(const Centerline& computed, const SweepCurve& analytic) {
  return centerline_error(computed.samples(), analytic);
}

std::string ground_truth_json(const Phantom& p) {
  json j;
  json spec;
  spec["preset"] = to_string(p.spec.preset);
  spec["length_mm"] = p.spec.length_mm;
  spec["radius_mm"] = p.spec.radius_mm;
  spec["spacing_mm"] = p.spec.spacing_mm;
  spec["amplitude_mm"] = p.spec.amplitude_mm;
  spec["period_mm"] = p.spec.period_mm;
  spec["body_hu"] = p.spec.body_hu;
  spec["air_hu"] = p.spec.air_hu;
  spec["margin_voxels"] = p.spec.margin_voxels;
  spec["seed_standoff_mm"] = p.spec.seed_standoff_mm;
  json polyps = json::array();
  for (const auto& ps : p.spec.polyps) {
    polyps.push_back({{"s_mm", ps.s_mm},
                      {"azimuth_deg", ps.azimuth_deg},
                      {"radius_mm", ps.radius_mm},
                      {"class", std::string(to_string(ps.anomaly))}});
  }
  spec["polyps"] = polyps;
  j["spec"] = spec;

  json samples = json::array();
  for (const auto& c : p.curve.sample(kCenterlineSampleSpacingMm)) samples.push_back(vec_json(c));
  j["centerline"] = samples;
  j["seeds"] = {{"start", vec_json(p.seed_start)}, {"end", vec_json(p.seed_end)}};

  json truth = json::array();
  for (const auto& t : p.polyps) {
    truth.push_back({{"apex", vec_json(t.apex)},
                     {"base_diameter_mm", t.base_diameter_mm},
                     {"s_mm", t.s_mm},
                     {"azimuth_deg", t.azimuth_deg},
                     {"class", std::string(to_string(t.anomaly))},
                     {"base_points", {vec_json(t.base_points[0]), vec_json(t.base_points[1])}}});
  }
  j["polyps"] = truth;
  return j.dump(2);
}

PhantomSpec phantom_spec_from_json(const std::string& text, PhantomSpec base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, e.what());
  }
  try {
    const json* polyps = &j;
    if (j.is_object()) {
      if (j.contains("preset")) base.preset = phantom_preset_from_string(j["preset"].get<std::string>());
      if (j.contains("length_mm")) base.length_mm = j["length_mm"].get<double>();
      if (j.contains("radius_mm")) base.radius_mm = j["radius_mm"].get<double>();
      if (j.contains("spacing_mm")) base.spacing_mm = j["spacing_mm"].get<double>();
      if (j.contains("amplitude_mm")) base.amplitude_mm = j["amplitude_mm"].get<double>();
      if (j.contains("period_mm")) base.period_mm = j["period_mm"].get<double>();
      if (j.contains("body_hu")) base.body_hu = j["body_hu"].get<std::int16_t>();
      if (j.contains("air_hu")) base.air_hu = j["air_hu"].get<std::int16_t>();
      if (j.contains("margin_voxels")) base.margin_voxels = j["margin_voxels"].get<int>();
      if (j.contains("seed_standoff_mm")) base.seed_standoff_mm = j["seed_standoff_mm"].get<double>();
      polyps = j.contains("polyps") ? &j["polyps"] : nullptr;
    }
    if (polyps) {
      base.polyps.clear();
      for (const auto& pj : *polyps) {
        PolypSpec ps;
        ps.s_mm = pj.at("s_mm").get<double>();
        ps.azimuth_deg = pj.value("azimuth_deg", 0.0);
        ps.radius_mm = pj.at("radius_mm").get<double>();
        ps.anomaly = anomaly_class_from_string(pj.value("class", std::string("Adenomatous")));
        base.polyps.push_back(ps);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, e.what());
  }
  return base;
}

void write_phantom(const Phantom& p, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_volume(p.volume, dir / "volume.json");
  std::ofstream out(dir / "ground_truth.json");
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot write ground truth in " + dir.string());
  }
  out << ground_truth_json(p) << '\n';
}

Phantom load_phantom(const std::filesystem::path& dir) {
  std::ifstream in(dir / "ground_truth.json");
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cannot open " + (dir / "ground_truth.json").string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  const json j = json::parse(buf.str(), nullptr, false);
  if (j.is_discarded() || !j.contains("spec")) {
    throw Error(ErrorCode::InvalidData, "ground_truth.json lacks a spec object");
  }
  const PhantomSpec spec = phantom_spec_from_json(j["spec"].dump(), PhantomSpec{});
  Phantom p = layout(spec);
  p.volume = load_volume(dir / "volume.json");
  if (j.contains("seeds")) {
    p.seed_start = vec_from(j["seeds"]["start"]);
    p.seed_end = vec_from(j["seeds"]["end"]);
  }
  return p;
}

}  // namespace ivc
