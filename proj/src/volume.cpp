#include "ivc/volume.h"

#include "ivc/error.h"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <fstream>
#include <iterator>

namespace ivc {

namespace {

using nlohmann::json;

struct RawHeader {
  Grid grid;
  std::string dtype;
  std::filesystem::path data_path;
};

Vec3 read_triple(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3) {
    throw Error(ErrorCode::MalformedHeader, std::string("missing or invalid field '") + key + "'");
  }
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!j[key][i].is_number()) {
      throw Error(ErrorCode::MalformedHeader, std::string("non-numeric entry in '") + key + "'");
    }
    out[i] = j[key][i].get<double>();
  }
  return out;
}

RawHeader read_header(const std::filesystem::path& header_path) {
  std::ifstream in(header_path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cannot open header " + header_path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedHeader, e.what());
  }
  if (!j.is_object()) {
    throw Error(ErrorCode::MalformedHeader, "header is not a JSON object");
  }

  RawHeader h;
  const Vec3 dims = read_triple(j, "dims");
  for (int i = 0; i < 3; ++i) {
    if (dims[i] < 1 || dims[i] != std::floor(dims[i]) || dims[i] > 1e5) {
      throw Error(ErrorCode::MalformedHeader, "dims must be positive integers");
    }
  }
  h.grid.dims = dims.cast<int>();
  h.grid.spacing_mm = read_triple(j, "spacing_mm");
  if ((h.grid.spacing_mm.array() <= 0).any() || !h.grid.spacing_mm.allFinite()) {
    throw Error(ErrorCode::MalformedHeader, "spacing_mm must be positive");
  }
  h.grid.origin_mm = read_triple(j, "origin_mm");
  if (!j.contains("dtype") || !j["dtype"].is_string()) {
    throw Error(ErrorCode::MalformedHeader, "missing field 'dtype'");
  }
  h.dtype = j["dtype"].get<std::string>();
  if (!j.contains("data_file") || !j["data_file"].is_string()) {
    throw Error(ErrorCode::MalformedHeader, "missing field 'data_file'");
  }
  h.data_path = header_path.parent_path() / j["data_file"].get<std::string>();
  return h;
}

std::vector<unsigned char> read_raw(const std::filesystem::path& path, std::size_t expected_bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cannot open data file " + path.string());
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != expected_bytes) {
    throw Error(ErrorCode::SizeMismatch, "expected " + std::to_string(expected_bytes) + " bytes, found " +
                                             std::to_string(bytes.size()));
  }
  return bytes;
}

void write_header(const Grid& g, const std::string& dtype, const std::filesystem::path& header_path,
                  const std::string& data_file) {
  json j;
  j["dims"] = {g.dims.x(), g.dims.y(), g.dims.z()};
  j["spacing_mm"] = {g.spacing_mm.x(), g.spacing_mm.y(), g.spacing_mm.z()};
  j["origin_mm"] = {g.origin_mm.x(), g.origin_mm.y(), g.origin_mm.z()};
  j["dtype"] = dtype;
  j["data_file"] = data_file;
  std::ofstream out(header_path);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot write header " + header_path.string());
  }
  out << j.dump(2) << '\n';
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot write data file " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::IoFailure, "short write to " + path.string());
  }
}

std::string data_file_name(const std::filesystem::path& header_path) {
  return header_path.stem().string() + ".raw";
}

}  // namespace

void Volume::validate() const {
  if ((grid.dims.array() < 1).any()) {
    throw Error(ErrorCode::InvalidData, "dims must be positive");
  }
  if (voxels.size() != grid.voxel_count()) {
    throw Error(ErrorCode::InvalidData, "voxel count does not match dims");
  }
  if ((grid.spacing_mm.array() <= 0).any()) {
    throw Error(ErrorCode::InvalidData, "spacing must be positive");
  }
  const auto [lo, hi] = std::minmax_element(voxels.begin(), voxels.end());
  if (*lo < kMinHu || *hi > kMaxHu) {
    throw Error(ErrorCode::InvalidData, "Hounsfield values outside [-1024, 3071]");
  }
}

std::size_t LumenMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

const char* to_string(SlicePlane plane) {
  switch (plane) {
    case SlicePlane::Axial: return "axial";
    case SlicePlane::Coronal: return "coronal";
    case SlicePlane::Sagittal: return "sagittal";
  }
  return "axial";
}

SlicePlane slice_plane_from_string(const std::string& name) {
  if (name == "axial") return SlicePlane::Axial;
  if (name == "coronal") return SlicePlane::Coronal;
  if (name == "sagittal") return SlicePlane::Sagittal;
  throw Error(ErrorCode::InvalidData, "unknown slice plane '" + name + "'");
}

Volume load_volume(const std::filesystem::path& header_path) {
  const RawHeader h = read_header(header_path);
  if (h.dtype != "int16-le") {
    throw Error(ErrorCode::MalformedHeader, "volume dtype must be int16-le, got " + h.dtype);
  }
  Volume v;
  v.grid = h.grid;
  const std::size_t n = v.grid.voxel_count();
  const auto bytes = read_raw(h.data_path, 2 * n);
  v.voxels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
    v.voxels[i] = static_cast<std::int16_t>(u);
  }
  v.validate();
  return v;
}

void write_volume(const Volume& v, const std::filesystem::path& header_path) {
  v.validate();
  std::vector<unsigned char> bytes(2 * v.voxels.size());
  for (std::size_t i = 0; i < v.voxels.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(v.voxels[i]);
    bytes[2 * i] = static_cast<unsigned char>(u & 0xff);
    bytes[2 * i + 1] = static_cast<unsigned char>(u >> 8);
  }
  const std::string data_file = data_file_name(header_path);
  write_bytes(header_path.parent_path() / data_file, bytes);
  write_header(v.grid, "int16-le", header_path, data_file);
}

LumenMask load_mask(const std::filesystem::path& header_path) {
  const RawHeader h = read_header(header_path);
  if (h.dtype != "uint8") {
    throw Error(ErrorCode::MalformedHeader, "mask dtype must be uint8, got " + h.dtype);
  }
  LumenMask m;
  m.grid = h.grid;
  const auto bytes = read_raw(h.data_path, m.grid.voxel_count());
  m.bits.assign(bytes.begin(), bytes.end());
  if (std::any_of(m.bits.begin(), m.bits.end(), [](std::uint8_t b) { return b > 1; })) {
    throw Error(ErrorCode::InvalidData, "mask values must be 0 or 1");
  }
  return m;
}

void write_mask(const LumenMask& m, const std::filesystem::path& header_path) {
  const std::string data_file = data_file_name(header_path);
  write_bytes(header_path.parent_path() / data_file, std::vector<unsigned char>(m.bits.begin(), m.bits.end()));
  write_header(m.grid, "uint8", header_path, data_file);
}

double sample_hu(const Volume& v, const Vec3& p) {
  constexpr double kSlack = 1e-9;
  Vec3 c = v.grid.world_to_voxel(p);
  for (int a = 0; a < 3; ++a) {
    const double hi = v.grid.dims[a] - 1;
    if (!(c[a] >= -kSlack && c[a] <= hi + kSlack)) {
      throw Error(ErrorCode::OutOfBounds, "sample point outside the volume");
    }
    c[a] = std::clamp(c[a], 0.0, hi);
  }

  std::array<int, 3> lo{};
  std::array<int, 3> hi{};
  std::array<double, 3> f{};
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::min(static_cast<int>(std::floor(c[a])), v.grid.dims[a] - 1);
    hi[a] = std::min(lo[a] + 1, v.grid.dims[a] - 1);
    f[a] = c[a] - lo[a];
  }

  double acc = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    int idx[3];
    for (int a = 0; a < 3; ++a) {
      const bool up = (corner >> a) & 1;
      w *= up ? f[a] : 1.0 - f[a];
      idx[a] = up ? hi[a] : lo[a];
    }
    if (w != 0.0) {
      acc += w * v.at(idx[0], idx[1], idx[2]);
    }
  }
  return acc;
}

SliceImage extract_slice(const Volume& v, const Vec3& p, SlicePlane plane, double window_center_hu,
                         double window_width_hu) {
  if (!(window_width_hu > 0.0)) {
    throw Error(ErrorCode::InvalidWindow, "window width must be positive");
  }
  const Vec3i voxel = v.grid.nearest_voxel(p);
  if (!v.grid.contains(voxel)) {
    throw Error(ErrorCode::OutOfBounds, "slice point outside the volume");
  }

  // (fixed axis, first in-plane axis, second in-plane axis)
  int fixed = 2, ax_i = 0, ax_j = 1;
  if (plane == SlicePlane::Coronal) {
    fixed = 1, ax_i = 0, ax_j = 2;
  } else if (plane == SlicePlane::Sagittal) {
    fixed = 0, ax_i = 1, ax_j = 2;
  }

  SliceImage s;
  s.plane = plane;
  s.index = voxel[fixed];
  s.window_center_hu = window_center_hu;
  s.window_width_hu = window_width_hu;
  s.crosshair = {voxel[ax_i], voxel[ax_j]};
  s.pixels.resize(v.grid.dims[ax_i], v.grid.dims[ax_j]);
  Vec3i cursor;
  cursor[fixed] = s.index;
  for (int j = 0; j < v.grid.dims[ax_j]; ++j) {
    cursor[ax_j] = j;
    for (int i = 0; i < v.grid.dims[ax_i]; ++i) {
      cursor[ax_i] = i;
      s.pixels(i, j) = window_intensity<double>(v.at(cursor), window_center_hu, window_width_hu);
    }
  }
  return s;
}

LumenMask segment_lumen(const Volume& v, const Vec3& seed, double air_threshold_hu) {
  const Vec3i start = v.grid.nearest_voxel(seed);
  if (!v.grid.contains(start)) {
    throw Error(ErrorCode::OutOfBounds, "seed outside the volume");
  }
  if (!(v.at(start) < air_threshold_hu)) {
    throw Error(ErrorCode::SeedNotInLumen, "seed voxel HU " + std::to_string(v.at(start)) + " is not below threshold");
  }

  LumenMask m;
  m.grid = v.grid;
  m.bits.assign(v.grid.voxel_count(), 0);

  static const std::array<Vec3i, 6> kNeighbors = {Vec3i(1, 0, 0),  Vec3i(-1, 0, 0), Vec3i(0, 1, 0),
                                                  Vec3i(0, -1, 0), Vec3i(0, 0, 1),  Vec3i(0, 0, -1)};
  std::deque<Vec3i> queue{start};
  m.bits[v.grid.linear(start)] = 1;
  while (!queue.empty()) {
    const Vec3i cur = queue.front();
    queue.pop_front();
    for (const auto& d : kNeighbors) {
      const Vec3i nb = cur + d;
      if (!v.grid.contains(nb)) continue;
      const std::size_t idx = v.grid.linear(nb);
      if (m.bits[idx] == 0 && v.voxels[idx] < air_threshold_hu) {
        m.bits[idx] = 1;
        queue.push_back(nb);
      }
    }
  }
  return m;
}

}  // namespace ivc
