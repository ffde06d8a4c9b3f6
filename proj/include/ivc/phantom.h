#pragma once

#include "ivc/annotations.h"
#include "ivc/centerline.h"
#include "ivc/types.h"
#include "ivc/volume.h"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <limits>
#include <vector>

namespace ivc {

enum class PhantomPreset { Straight, SCurve };

const char* to_string(PhantomPreset p);
PhantomPreset phantom_preset_from_string(const std::string& name);

/// Hemispherical sessile bump on the wall, protruding into the lumen.
struct PolypSpec {
  double s_mm = 0.0;
  double azimuth_deg = 0.0;
  double radius_mm = 2.0;
  AnomalyClass anomaly = AnomalyClass::Adenomatous;
};

struct PhantomSpec {
  PhantomPreset preset = PhantomPreset::Straight;
  double length_mm = 200.0;  // arc length of the sweep curve
  double radius_mm = 12.5;
  double spacing_mm = 1.0;
  std::vector<PolypSpec> polyps;
  std::int16_t body_hu = 40;
  std::int16_t air_hu = -1000;
  double amplitude_mm = 60.0;  // s_curve only
  double period_mm = 150.0;    // s_curve only
  int margin_voxels = 2;
  double seed_standoff_mm = 5.0;

  static PhantomSpec straight();
  static PhantomSpec s_curve();  // 300 mm planar sine
  void validate() const;
};

/// Analytic sweep curve, parameterized by arc length.
class SweepCurve {
 public:
  SweepCurve() = default;
  explicit SweepCurve(const PhantomSpec& spec);

  double length() const { return length_; }
  Vec3 point(double s) const;
  Vec3 tangent(double s) const;
  /// Wall direction at `azimuth_deg`: 0 = in-plane normal, 90 = +z.
  Vec3 radial(double s, double azimuth_deg) const;

  struct Nearest {
    double s_mm;
    double distance_mm;
  };
  /// Exact when the distance is at most `cutoff`.
  Nearest nearest(const Vec3& p, double cutoff = std::numeric_limits<double>::infinity()) const;

  /// Samples every `step` mm of arc length, endpoints included.
  std::vector<Vec3> sample(double step) const;

 private:
  double param_at(double s) const;  // curve parameter (x) for arc length s
  Vec3 point_param(double t) const;
  Vec3 derivative_param(double t) const;

  PhantomPreset preset_ = PhantomPreset::Straight;
  double amplitude_ = 0.0;
  double wavenumber_ = 0.0;
  double length_ = 0.0;
  double table_step_ = 0.0;
  std::vector<double> arc_table_;  // arc length at t = i * table_step_
  std::vector<std::pair<double, Vec3>> coarse_;  // (s, point) every 0.5 mm
};

struct PolypTruth {
  Vec3 apex = Vec3::Zero();
  Vec3 base_center = Vec3::Zero();
  double base_diameter_mm = 0.0;
  double s_mm = 0.0;
  double azimuth_deg = 0.0;
  AnomalyClass anomaly = AnomalyClass::Adenomatous;
  /// Antipodal base-rim points along the local axis.
  std::array<Vec3, 2> base_points{Vec3::Zero(), Vec3::Zero()};
};

struct Phantom {
  PhantomSpec spec;
  Volume volume;
  SweepCurve curve;
  std::vector<PolypTruth> polyps;
  Vec3 seed_start = Vec3::Zero();
  Vec3 seed_end = Vec3::Zero();
};

/// Three findings of increasing size (4, 8, 12 mm bases) along the S-curve.
std::vector<PolypSpec> screening_polyps();

/// Deterministic synthetic colon. UnresolvablePolyp when a polyp spans
/// fewer than four voxels.
Phantom generate_phantom(const PhantomSpec& spec);

struct CenterlineError {
  double rms_mm = 0.0;
  double max_mm = 0.0;
};

CenterlineError centerline_error(const Centerline& computed, const SweepCurve& analytic);
CenterlineError centerline_error(const std::vector<Vec3>& computed, const SweepCurve& analytic);

/// Writes volume.json/volume.raw and ground_truth.json into `dir`.
void write_phantom(const Phantom& p, const std::filesystem::path& dir);
/// Reads a directory produced by write_phantom.
Phantom load_phantom(const std::filesystem::path& dir);

std::string ground_truth_json(const Phantom& p);
PhantomSpec phantom_spec_from_json(const std::string& text, PhantomSpec base);

}  // namespace ivc
