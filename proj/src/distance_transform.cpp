#include "ivc/distance_transform.h"

#include "ivc/error.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ivc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// In-place 1D squared distance transform of a sampled function with
// sample spacing `h`. Infinite entries are not parabola sites.
void edt_1d(double* f, std::size_t n, std::size_t stride, double h, std::vector<double>& buf_f,
            std::vector<int>& sites, std::vector<double>& bounds) {
  buf_f.resize(n);
  sites.resize(n);
  bounds.resize(n + 1);
  for (std::size_t i = 0; i < n; ++i) buf_f[i] = f[i * stride];

  const double h2 = h * h;
  int k = -1;
  for (int q = 0; q < static_cast<int>(n); ++q) {
    if (std::isinf(buf_f[q])) continue;
    if (k < 0) {
      k = 0;
      sites[0] = q;
      bounds[0] = -kInf;
      bounds[1] = kInf;
      continue;
    }
    double s;
    while (true) {
      const int p = sites[k];
      // Intersection of parabolas rooted at p and q, in index units.
      s = ((buf_f[q] + h2 * q * q) - (buf_f[p] + h2 * p * p)) / (2.0 * h2 * (q - p));
      if (s <= bounds[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    if (s <= bounds[k]) {
      // k == 0 and the new parabola dominates everywhere.
      sites[0] = q;
      bounds[0] = -kInf;
      bounds[1] = kInf;
      continue;
    }
    ++k;
    sites[k] = q;
    bounds[k] = s;
    bounds[k + 1] = kInf;
  }
  if (k < 0) {
    return;  // no finite site: the whole line stays infinite
  }
  int j = 0;
  for (int q = 0; q < static_cast<int>(n); ++q) {
    while (bounds[j + 1] < q) ++j;
    const double d = (q - sites[j]) * h;
    f[q * stride] = d * d + buf_f[sites[j]];
  }
}

}  // namespace

double DistanceField::max() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

double DistanceField::interpolate(const Vec3& p) const {
  Vec3 c = grid.world_to_voxel(p);
  double acc = 0.0;
  int lo[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    c[a] = std::clamp(c[a], 0.0, static_cast<double>(grid.dims[a] - 1));
    lo[a] = std::min(static_cast<int>(std::floor(c[a])), std::max(grid.dims[a] - 2, 0));
    f[a] = c[a] - lo[a];
  }
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    Vec3i v;
    for (int a = 0; a < 3; ++a) {
      const bool up = (corner >> a) & 1;
      w *= up ? f[a] : 1.0 - f[a];
      v[a] = std::min(lo[a] + (up ? 1 : 0), grid.dims[a] - 1);
    }
    if (w != 0.0) acc += w * at(v);
  }
  return acc;
}

DistanceField distance_transform(const LumenMask& mask) { return distance_transform(mask, mask.grid.spacing_mm); }

DistanceField distance_transform(const LumenMask& mask, const Vec3& spacing_mm) {
  const std::size_t fg = mask.count();
  if (fg == 0) {
    throw Error(ErrorCode::EmptyMask, "mask has no lumen voxels");
  }
  if (fg == mask.bits.size()) {
    throw Error(ErrorCode::AllForeground, "mask has no background voxel");
  }

  DistanceField df;
  df.grid = mask.grid;
  df.grid.spacing_mm = spacing_mm;
  df.values.resize(mask.bits.size());
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    df.values[i] = mask.bits[i] ? kInf : 0.0;
  }

  const Vec3i d = mask.grid.dims;
  const std::size_t nx = d.x();
  const std::size_t ny = d.y();
  const std::size_t nz = d.z();
  std::vector<double> buf;
  std::vector<int> sites;
  std::vector<double> bounds;
  double* data = df.values.data();

  for (std::size_t k = 0; k < nz; ++k)
    for (std::size_t j = 0; j < ny; ++j)
      edt_1d(data + nx * (j + ny * k), nx, 1, spacing_mm.x(), buf, sites, bounds);
  for (std::size_t k = 0; k < nz; ++k)
    for (std::size_t i = 0; i < nx; ++i)
      edt_1d(data + i + nx * ny * k, ny, nx, spacing_mm.y(), buf, sites, bounds);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i)
      edt_1d(data + i + nx * j, nz, nx * ny, spacing_mm.z(), buf, sites, bounds);

  for (auto& v : df.values) v = std::sqrt(v);
  return df;
}

}  // namespace ivc
