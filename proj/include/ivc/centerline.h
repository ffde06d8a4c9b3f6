#pragma once

#include "ivc/distance_transform.h"
#include "ivc/types.h"
#include "ivc/volume.h"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ivc {

inline constexpr double kCenterlineSampleSpacingMm = 1.0;

/// Arc-length parameterized mid-line, index 0 at the rectum end.
class Centerline {
 public:
  Centerline() = default;
  /// Builds cumulative lengths from the polyline; radii must be positive.
  Centerline(std::vector<Vec3> samples, std::vector<double> radius_mm);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  double total_length() const { return cum_length_.empty() ? 0.0 : cum_length_.back(); }

  const std::vector<Vec3>& samples() const { return samples_; }
  const std::vector<double>& cum_length() const { return cum_length_; }
  const std::vector<double>& radius() const { return radius_mm_; }
  const std::vector<std::uint8_t>& visited() const { return visited_; }

  Vec3 point_at(double s) const;
  double radius_at(double s) const;

  /// Flags every sample with cum_length in [s_lo, s_hi]. Flags never clear.
  void mark_visited(double s_lo, double s_hi);
  double visited_fraction() const;

 private:
  // Segment index and fraction for arc length s (clamped).
  std::pair<std::size_t, double> locate(double s) const;

  std::vector<Vec3> samples_;
  std::vector<double> cum_length_;
  std::vector<double> radius_mm_;
  std::vector<std::uint8_t> visited_;
};

struct CenterlinePoint {
  double s_mm = 0.0;
  Vec3 point = Vec3::Zero();
};

struct CenterlineOptions {
  int smoothing_window = 5;
  int smoothing_iterations = 3;
  double sample_spacing_mm = kCenterlineSampleSpacingMm;
};

/// Wall-penalized 26-connected Dijkstra path between the seed voxels,
/// smoothed and resampled to equal 1 mm chords.
Centerline extract_centerline(const LumenMask& mask, const DistanceField& df, const Vec3& seed_start,
                              const Vec3& seed_end, const CenterlineOptions& options = {});

/// Raw voxel path (world centers) of the penalized shortest path.
std::vector<Vec3> shortest_medial_path(const LumenMask& mask, const DistanceField& df, const Vec3& seed_start,
                                       const Vec3& seed_end);

/// Symmetric moving average; window shrinks at the ends so endpoints stay fixed.
std::vector<Vec3> smooth_polyline(const std::vector<Vec3>& points, int window, int iterations);

/// Points along the polyline at exactly `spacing` chord distance from each other.
std::vector<Vec3> resample_equal_chords(const std::vector<Vec3>& points, double spacing);

/// Closest point on the polyline; ties go to the smaller arc length.
CenterlinePoint nearest_on_centerline(const Centerline& c, const Vec3& p);

/// Central difference over +-2 mm (one-sided at the ends), normalized.
Vec3 tangent_at(const Centerline& c, double s);

void mark_visited(Centerline& c, double s_lo, double s_hi);
double visited_fraction(const Centerline& c);

/// CSV with header s_mm,x,y,z,radius_mm,visited.
std::string to_csv(const Centerline& c);
void write_centerline_csv(const Centerline& c, const std::filesystem::path& path);
Centerline parse_centerline_csv(const std::string& text);

}  // namespace ivc
