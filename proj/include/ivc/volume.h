#pragma once

#include "ivc/types.h"

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ivc {

inline constexpr std::int16_t kMinHu = -1024;
inline constexpr std::int16_t kMaxHu = 3071;
inline constexpr double kDefaultAirThresholdHu = -700.0;
inline constexpr double kDefaultWindowCenterHu = 40.0;
inline constexpr double kDefaultWindowWidthHu = 400.0;

/// CT volume in Hounsfield units, x-fastest voxel order.
struct Volume {
  Grid grid;
  std::vector<std::int16_t> voxels;

  /// Throws InvalidData if the voxel count, spacing or HU range is violated.
  void validate() const;

  std::int16_t at(int i, int j, int k) const { return voxels[grid.linear(i, j, k)]; }
  std::int16_t at(const Vec3i& v) const { return voxels[grid.linear(v)]; }
};

/// Air-filled lumen segmentation. `bits` holds 0/1 per voxel.
struct LumenMask {
  Grid grid;
  std::vector<std::uint8_t> bits;

  bool at(int i, int j, int k) const { return bits[grid.linear(i, j, k)] != 0; }
  bool at(const Vec3i& v) const { return bits[grid.linear(v)] != 0; }
  std::size_t count() const;
};

enum class SlicePlane { Axial, Coronal, Sagittal };

const char* to_string(SlicePlane plane);
SlicePlane slice_plane_from_string(const std::string& name);

/// Windowed 2D slice. `pixels(i, j)` uses the first and second in-plane voxel
/// axes: (x, y) for axial, (x, z) for coronal, (y, z) for sagittal.
struct SliceImage {
  SlicePlane plane = SlicePlane::Axial;
  int index = 0;
  Eigen::MatrixXd pixels;
  Eigen::Vector2i crosshair = Eigen::Vector2i::Zero();
  double window_center_hu = kDefaultWindowCenterHu;
  double window_width_hu = kDefaultWindowWidthHu;
};

/// Affine HU -> [0,1] display mapping.
template <typename S>
S window_intensity(S hu, S center, S width) {
  const S lo = center - width / S(2);
  const S hi = center + width / S(2);
  if (hu <= lo) return S(0);
  if (hu >= hi) return S(1);
  return std::min((hu - lo) / width, S(1));
}

Volume load_volume(const std::filesystem::path& header_path);
void write_volume(const Volume& v, const std::filesystem::path& header_path);

LumenMask load_mask(const std::filesystem::path& header_path);
void write_mask(const LumenMask& m, const std::filesystem::path& header_path);

inline Vec3 world_to_voxel(const Volume& v, const Vec3& p) { return v.grid.world_to_voxel(p); }
inline Vec3 voxel_to_world(const Volume& v, const Vec3& c) { return v.grid.voxel_to_world(c); }

/// Trilinear HU at a world point; OutOfBounds outside [0, dim-1].
double sample_hu(const Volume& v, const Vec3& p);

SliceImage extract_slice(const Volume& v, const Vec3& p, SlicePlane plane,
                         double window_center_hu = kDefaultWindowCenterHu,
                         double window_width_hu = kDefaultWindowWidthHu);

/// 6-connected flood fill from `seed` over voxels with HU < threshold.
LumenMask segment_lumen(const Volume& v, const Vec3& seed,
                        double air_threshold_hu = kDefaultAirThresholdHu);

}  // namespace ivc
