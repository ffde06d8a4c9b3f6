#include "ivc/surface.h"

#include "ivc/error.h"

#include <array>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

namespace ivc {

namespace {

constexpr double kIsoLevel = 0.5;

// One pass of a separable 3x3x3 box filter, zero outside the grid.
std::vector<double> box_filter(const Grid& g, const std::vector<double>& in) {
  std::vector<double> a = in;
  std::vector<double> b(in.size());
  const std::array<std::size_t, 3> stride = {1, static_cast<std::size_t>(g.dims.x()),
                                             static_cast<std::size_t>(g.dims.x()) * g.dims.y()};
  for (int axis = 0; axis < 3; ++axis) {
    const int n = g.dims[axis];
    for (std::size_t idx = 0; idx < a.size(); ++idx) {
      const int coord = g.unlinear(idx)[axis];
      double sum = a[idx];
      if (coord > 0) sum += a[idx - stride[axis]];
      if (coord + 1 < n) sum += a[idx + stride[axis]];
      b[idx] = sum / 3.0;
    }
    std::swap(a, b);
  }
  return a;
}

// Corner offsets of a cell; bit 0 = x, bit 1 = y, bit 2 = z.
Vec3i corner_offset(int c) { return {c & 1, (c >> 1) & 1, (c >> 2) & 1}; }

// Six tetrahedra sharing the 0-7 diagonal, one per axis permutation.
constexpr std::array<std::array<int, 4>, 6> kTetrahedra = {{
    {0, 1, 3, 7},
    {0, 1, 5, 7},
    {0, 2, 3, 7},
    {0, 2, 6, 7},
    {0, 4, 5, 7},
    {0, 4, 6, 7},
}};

class TetMesher {
 public:
  TetMesher(const Grid& grid, const std::vector<double>& field) : grid_(grid), field_(field) {
    edge_vertex_.reserve(field.size() / 8);
  }

  void polygonize_cell(const Vec3i& base) {
    std::array<std::size_t, 8> ids{};
    std::array<double, 8> vals{};
    int inside = 0;
    for (int c = 0; c < 8; ++c) {
      ids[c] = grid_.linear(base + corner_offset(c));
      vals[c] = field_[ids[c]];
      inside += vals[c] > kIsoLevel ? 1 : 0;
    }
    if (inside == 0 || inside == 8) {
      return;
    }
    for (const auto& tet : kTetrahedra) {
      polygonize_tet(tet, ids, vals);
    }
  }

  Mesh take() {
    Mesh m;
    m.vertices = std::move(vertices_);
    m.triangles = std::move(triangles_);
    return m;
  }

 private:
  void polygonize_tet(const std::array<int, 4>& tet, const std::array<std::size_t, 8>& ids,
                      const std::array<double, 8>& vals) {
    std::array<int, 4> in{};
    std::array<int, 4> out{};
    int n_in = 0;
    int n_out = 0;
    for (int c : tet) {
      if (vals[c] > kIsoLevel) {
        in[n_in++] = c;
      } else {
        out[n_out++] = c;
      }
    }
    if (n_in == 0 || n_out == 0) {
      return;
    }

    Vec3 in_centroid = Vec3::Zero();
    Vec3 out_centroid = Vec3::Zero();
    for (int i = 0; i < n_in; ++i) in_centroid += position(ids[in[i]]);
    for (int i = 0; i < n_out; ++i) out_centroid += position(ids[out[i]]);
    const Vec3 toward_lumen = in_centroid / n_in - out_centroid / n_out;

    auto ev = [&](int a, int b) { return edge_vertex(ids[a], vals[a], ids[b], vals[b]); };
    if (n_in == 1) {
      emit(ev(in[0], out[0]), ev(in[0], out[1]), ev(in[0], out[2]), toward_lumen);
    } else if (n_out == 1) {
      emit(ev(out[0], in[0]), ev(out[0], in[1]), ev(out[0], in[2]), toward_lumen);
    } else {
      // Quad on edges in0-out0, in0-out1, in1-out1, in1-out0.
      const int q0 = ev(in[0], out[0]);
      const int q1 = ev(in[0], out[1]);
      const int q2 = ev(in[1], out[1]);
      const int q3 = ev(in[1], out[0]);
      emit(q0, q1, q2, toward_lumen);
      emit(q0, q2, q3, toward_lumen);
    }
  }

  Vec3 position(std::size_t id) const { return grid_.voxel_center(grid_.unlinear(id)); }

  int edge_vertex(std::size_t ia, double fa, std::size_t ib, double fb) {
    if (ia > ib) {
      std::swap(ia, ib);
      std::swap(fa, fb);
    }
    const std::uint64_t key = static_cast<std::uint64_t>(ia) * field_.size() + ib;
    const auto it = edge_vertex_.find(key);
    if (it != edge_vertex_.end()) {
      return it->second;
    }
    const double t = (kIsoLevel - fa) / (fb - fa);
    const Vec3 pa = position(ia);
    const Vec3 pb = position(ib);
    const int index = static_cast<int>(vertices_.size());
    vertices_.push_back(pa + t * (pb - pa));
    edge_vertex_.emplace(key, index);
    return index;
  }

  void emit(int a, int b, int c, const Vec3& toward_lumen) {
    const Vec3 n = (vertices_[b] - vertices_[a]).cross(vertices_[c] - vertices_[a]);
    if (n.squaredNorm() == 0.0) {
      return;
    }
    if (n.dot(toward_lumen) < 0.0) {
      std::swap(b, c);
    }
    triangles_.emplace_back(a, b, c);
  }

  const Grid& grid_;
  const std::vector<double>& field_;
  std::unordered_map<std::uint64_t, int> edge_vertex_;
  std::vector<Vec3> vertices_;
  std::vector<Eigen::Vector3i> triangles_;
};

}  // namespace

Vec3 Mesh::face_normal(std::size_t t) const {
  const auto& tri = triangles[t];
  return (vertices[tri[1]] - vertices[tri[0]]).cross(vertices[tri[2]] - vertices[tri[0]]);
}

double Mesh::triangle_area(std::size_t t) const { return 0.5 * face_normal(t).norm(); }

Mesh extract_isosurface(const LumenMask& mask, const Volume& v, const IsosurfaceOptions& options) {
  if (mask.grid.dims != v.grid.dims) {
    throw Error(ErrorCode::InvalidData, "mask and volume dims differ");
  }
  LumenMask placed = mask;
  placed.grid = v.grid;
  return extract_isosurface(placed, options);
}

Mesh extract_isosurface(const LumenMask& mask, const IsosurfaceOptions& options) {
  const Grid& g = mask.grid;
  if (mask.bits.size() != g.voxel_count()) {
    throw Error(ErrorCode::InvalidData, "mask size does not match dims");
  }
  bool any = false;
  for (std::size_t idx = 0; idx < mask.bits.size(); ++idx) {
    if (!mask.bits[idx]) continue;
    any = true;
    const Vec3i v = g.unlinear(idx);
    if ((v.array() == 0).any() || (v.array() == g.dims.array() - 1).any()) {
      throw Error(ErrorCode::MaskTouchesBoundary, "lumen reaches the grid boundary; surface would be open");
    }
  }
  if (!any) {
    throw Error(ErrorCode::EmptyMask, "mask has no lumen voxels");
  }

  std::vector<double> field(mask.bits.begin(), mask.bits.end());
  for (int pass = 0; pass < options.smoothing_passes; ++pass) {
    field = box_filter(g, field);
  }

  TetMesher mesher(g, field);
  for (int k = 0; k + 1 < g.dims.z(); ++k) {
    for (int j = 0; j + 1 < g.dims.y(); ++j) {
      for (int i = 0; i + 1 < g.dims.x(); ++i) {
        mesher.polygonize_cell({i, j, k});
      }
    }
  }
  Mesh m = mesher.take();
  m.normals = compute_vertex_normals(m);
  return m;
}

std::vector<Vec3> compute_vertex_normals(const Mesh& m) {
  std::vector<Vec3> normals(m.vertices.size(), Vec3::Zero());
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const Vec3 n = m.face_normal(t);
    for (int c = 0; c < 3; ++c) {
      normals[m.triangles[t][c]] += n;
    }
  }
  for (auto& n : normals) {
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3::UnitZ();
  }
  return normals;
}

double surface_area(const Mesh& m) {
  double area = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    area += m.triangle_area(t);
  }
  return area;
}

double enclosed_volume(const Mesh& m) {
  double vol = 0.0;
  for (const auto& tri : m.triangles) {
    vol += m.vertices[tri[0]].dot(m.vertices[tri[1]].cross(m.vertices[tri[2]]));
  }
  // Normals face inward, so the divergence-theorem sum is negated.
  return -vol / 6.0;
}

namespace {

std::map<std::pair<int, int>, int> edge_use(const Mesh& m) {
  std::map<std::pair<int, int>, int> uses;
  for (const auto& tri : m.triangles) {
    for (int e = 0; e < 3; ++e) {
      int a = tri[e];
      int b = tri[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++uses[{a, b}];
    }
  }
  return uses;
}

}  // namespace

long euler_characteristic(const Mesh& m) {
  const auto uses = edge_use(m);
  return static_cast<long>(m.vertices.size()) - static_cast<long>(uses.size()) +
      static_cast<long>(m.triangles.size());
}

bool is_watertight(const Mesh& m) {
  if (m.triangles.empty()) return false;
  for (const auto& [edge, count] : edge_use(m)) {
    if (count != 2) return false;
  }
  return true;
}

void validate_mesh(const Mesh& m) {
  const auto nv = static_cast<int>(m.vertices.size());
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tri = m.triangles[t];
    if ((tri.array() < 0).any() || (tri.array() >= nv).any()) {
      throw Error(ErrorCode::InvalidData, "triangle index out of range");
    }
    if (m.triangle_area(t) <= 0.0) {
      throw Error(ErrorCode::InvalidData, "degenerate triangle " + std::to_string(t));
    }
  }
  if (m.normals.size() != m.vertices.size()) {
    throw Error(ErrorCode::InvalidData, "normal count differs from vertex count");
  }
  for (const auto& n : m.normals) {
    if (std::abs(n.norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::InvalidData, "non-unit vertex normal");
    }
  }
}

std::string to_obj(const Mesh& m) {
  std::ostringstream out;
  out << std::setprecision(10);
  for (const auto& v : m.vertices) {
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  }
  for (const auto& n : m.normals) {
    out << "vn " << n.x() << ' ' << n.y() << ' ' << n.z() << '\n';
  }
  const bool with_normals = m.normals.size() == m.vertices.size();
  for (const auto& tri : m.triangles) {
    out << 'f';
    for (int c = 0; c < 3; ++c) {
      const int i = tri[c] + 1;
      out << ' ' << i;
      if (with_normals) out << "//" << i;
    }
    out << '\n';
  }
  return out.str();
}

void write_obj(const Mesh& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  }
  out << to_obj(m);
}

}  // namespace ivc
