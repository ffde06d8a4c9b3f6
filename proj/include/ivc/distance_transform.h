#pragma once

#include "ivc/types.h"
#include "ivc/volume.h"

#include <vector>

namespace ivc {

/// Euclidean distance (mm) from each lumen voxel center to the nearest
/// non-lumen voxel center; zero on non-lumen voxels.
struct DistanceField {
  Grid grid;
  std::vector<double> values;

  double at(const Vec3i& v) const { return values[grid.linear(v)]; }
  double max() const;
  /// Trilinear value at a world point, clamped to the grid.
  double interpolate(const Vec3& p) const;
};

/// Exact separable squared-EDT (lower envelope of parabolas per axis).
DistanceField distance_transform(const LumenMask& mask, const Vec3& spacing_mm);
DistanceField distance_transform(const LumenMask& mask);

}  // namespace ivc
