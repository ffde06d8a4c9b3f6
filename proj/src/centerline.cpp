#include "ivc/centerline.h"

#include "ivc/error.h"
#include "ivc/geometry.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <queue>
#include <sstream>

namespace ivc {

namespace {

constexpr double kRangeSlack = 1e-9;
constexpr double kTieTolerance = 1e-12;
constexpr double kTangentHalfSpanMm = 2.0;

}  // namespace

Centerline::Centerline(std::vector<Vec3> samples, std::vector<double> radius_mm)
    : samples_(std::move(samples)), radius_mm_(std::move(radius_mm)) {
  if (samples_.empty()) {
    throw Error(ErrorCode::InvalidData, "centerline needs at least one sample");
  }
  if (radius_mm_.size() != samples_.size()) {
    throw Error(ErrorCode::InvalidData, "one radius per sample required");
  }
  cum_length_.resize(samples_.size());
  cum_length_[0] = 0.0;
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    const double step = (samples_[i] - samples_[i - 1]).norm();
    if (!(step > 0.0)) {
      throw Error(ErrorCode::InvalidData, "centerline samples must be distinct");
    }
    cum_length_[i] = cum_length_[i - 1] + step;
  }
  for (double r : radius_mm_) {
    if (!(r > 0.0)) {
      throw Error(ErrorCode::InvalidData, "centerline radius must be positive");
    }
  }
  visited_.assign(samples_.size(), 0);
}

std::pair<std::size_t, double> Centerline::locate(double s) const {
  if (samples_.size() == 1 || s <= 0.0) {
    return {0, 0.0};
  }
  if (s >= total_length()) {
    return {samples_.size() - 2, 1.0};
  }
  const auto it = std::upper_bound(cum_length_.begin(), cum_length_.end(), s);
  const std::size_t seg = static_cast<std::size_t>(it - cum_length_.begin()) - 1;
  const double len = cum_length_[seg + 1] - cum_length_[seg];
  return {seg, (s - cum_length_[seg]) / len};
}

Vec3 Centerline::point_at(double s) const {
  const auto [seg, f] = locate(s);
  if (samples_.size() == 1) return samples_[0];
  return samples_[seg] + f * (samples_[seg + 1] - samples_[seg]);
}

double Centerline::radius_at(double s) const {
  const auto [seg, f] = locate(s);
  if (samples_.size() == 1) return radius_mm_[0];
  return radius_mm_[seg] + f * (radius_mm_[seg + 1] - radius_mm_[seg]);
}

void Centerline::mark_visited(double s_lo, double s_hi) {
  if (s_lo < -kRangeSlack || s_hi > total_length() + kRangeSlack || s_lo > s_hi) {
    throw Error(ErrorCode::OutOfRange, "visited interval outside the centerline");
  }
  auto it = std::lower_bound(cum_length_.begin(), cum_length_.end(), s_lo);
  for (; it != cum_length_.end() && *it <= s_hi; ++it) {
    visited_[static_cast<std::size_t>(it - cum_length_.begin())] = 1;
  }
}

double Centerline::visited_fraction() const {
  if (visited_.empty()) return 0.0;
  const auto n = std::count(visited_.begin(), visited_.end(), std::uint8_t{1});
  return static_cast<double>(n) / static_cast<double>(visited_.size());
}

void mark_visited(Centerline& c, double s_lo, double s_hi) { c.mark_visited(s_lo, s_hi); }
double visited_fraction(const Centerline& c) { return c.visited_fraction(); }

std::vector<Vec3> shortest_medial_path(const LumenMask& mask, const DistanceField& df, const Vec3& seed_start,
                                       const Vec3& seed_end) {
  const Grid& g = mask.grid;
  const Vec3i start = g.nearest_voxel(seed_start);
  const Vec3i end = g.nearest_voxel(seed_end);
  if (!g.contains(start) || !mask.at(start)) {
    throw Error(ErrorCode::SeedOutsideLumen, "start seed is not a lumen voxel");
  }
  if (!g.contains(end) || !mask.at(end)) {
    throw Error(ErrorCode::SeedOutsideLumen, "end seed is not a lumen voxel");
  }
  if (start == end) {
    throw Error(ErrorCode::SeedsCoincident, "start and end seeds map to the same voxel");
  }

  const double d_max = df.max();
  struct Step {
    Vec3i offset;
    double length;
  };
  std::vector<Step> steps;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        const Vec3i o(dx, dy, dz);
        steps.push_back({o, o.cast<double>().cwiseProduct(df.grid.spacing_mm).norm()});
      }

  const std::size_t n = g.voxel_count();
  const std::size_t source = g.linear(start);
  const std::size_t target = g.linear(end);
  std::vector<double> cost(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> parent(n, n);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  cost[source] = 0.0;
  open.emplace(0.0, source);
  while (!open.empty()) {
    const auto [c, idx] = open.top();
    open.pop();
    if (c > cost[idx]) continue;
    if (idx == target) break;
    const Vec3i v = g.unlinear(idx);
    for (const auto& st : steps) {
      const Vec3i nb = v + st.offset;
      if (!g.contains(nb)) continue;
      const std::size_t ni = g.linear(nb);
      if (!mask.bits[ni]) continue;
      const double ratio = d_max / df.values[ni];
      const double next = c + st.length * ratio * ratio;
      if (next < cost[ni]) {
        cost[ni] = next;
        parent[ni] = idx;
        open.emplace(next, ni);
      }
    }
  }
  if (parent[target] == n) {
    throw Error(ErrorCode::SeedsNotConnected, "no lumen path between the seeds");
  }

  std::vector<Vec3> path;
  for (std::size_t idx = target; idx != n; idx = parent[idx]) {
    path.push_back(g.voxel_center(g.unlinear(idx)));
    if (idx == source) break;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<Vec3> smooth_polyline(const std::vector<Vec3>& points, int window, int iterations) {
  const int half = window / 2;
  std::vector<Vec3> cur = points;
  std::vector<Vec3> next(points.size());
  const int n = static_cast<int>(points.size());
  for (int it = 0; it < iterations; ++it) {
    for (int i = 0; i < n; ++i) {
      const int h = std::min({half, i, n - 1 - i});
      Vec3 acc = Vec3::Zero();
      for (int k = i - h; k <= i + h; ++k) acc += cur[k];
      next[i] = acc / (2 * h + 1);
    }
    std::swap(cur, next);
  }
  return cur;
}

std::vector<Vec3> resample_equal_chords(const std::vector<Vec3>& points, double spacing) {
  std::vector<Vec3> out;
  if (points.empty()) return out;
  out.push_back(points.front());
  std::size_t seg = 0;
  double t0 = 0.0;
  while (seg + 1 < points.size()) {
    const Vec3& q = out.back();
    bool found = false;
    for (; seg + 1 < points.size(); ++seg, t0 = 0.0) {
      const Vec3 a = points[seg];
      const Vec3 d = points[seg + 1] - a;
      const double dd = d.squaredNorm();
      if (dd == 0.0) continue;
      const Vec3 w = a - q;
      const double wd = w.dot(d);
      const double disc = wd * wd - dd * (w.squaredNorm() - spacing * spacing);
      if (disc < 0.0) continue;
      const double t = (-wd + std::sqrt(disc)) / dd;
      if (t >= t0 && t <= 1.0) {
        out.push_back(a + t * d);
        t0 = t;
        found = true;
        break;
      }
    }
    if (!found) break;
  }
  return out;
}

Centerline extract_centerline(const LumenMask& mask, const DistanceField& df, const Vec3& seed_start,
                              const Vec3& seed_end, const CenterlineOptions& options) {
  const auto path = shortest_medial_path(mask, df, seed_start, seed_end);
  const auto smooth = smooth_polyline(path, options.smoothing_window, options.smoothing_iterations);
  auto samples = resample_equal_chords(smooth, options.sample_spacing_mm);
  if (samples.size() < 2) {
    throw Error(ErrorCode::SeedsCoincident, "seeds closer than one sample spacing");
  }

  std::vector<double> radius;
  radius.reserve(samples.size());
  for (const auto& p : samples) {
    const Vec3i v = mask.grid.nearest_voxel(p);
    if (!mask.grid.contains(v) || !mask.at(v)) {
      throw Error(ErrorCode::InvalidData, "smoothed centerline left the lumen");
    }
    radius.push_back(df.interpolate(p));
  }
  return Centerline(std::move(samples), std::move(radius));
}

CenterlinePoint nearest_on_centerline(const Centerline& c, const Vec3& p) {
  const auto& pts = c.samples();
  const auto& cum = c.cum_length();
  CenterlinePoint best{0.0, pts.front()};
  double best_d = (p - pts.front()).norm();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double t = closest_segment_parameter<double>(p, pts[i], pts[i + 1]);
    const Vec3 q = pts[i] + t * (pts[i + 1] - pts[i]);
    const double d = (p - q).norm();
    if (d < best_d - kTieTolerance) {
      best_d = d;
      best = {cum[i] + t * (cum[i + 1] - cum[i]), q};
    }
  }
  return best;
}

Vec3 tangent_at(const Centerline& c, double s) {
  const double len = c.total_length();
  if (s < -kRangeSlack || s > len + kRangeSlack) {
    throw Error(ErrorCode::OutOfRange, "arc length outside the centerline");
  }
  if (c.size() < 2) {
    throw Error(ErrorCode::OutOfRange, "tangent needs at least two samples");
  }
  const Vec3 a = c.point_at(std::max(s - kTangentHalfSpanMm, 0.0));
  const Vec3 b = c.point_at(std::min(s + kTangentHalfSpanMm, len));
  return (b - a).normalized();
}

std::string to_csv(const Centerline& c) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "s_mm,x,y,z,radius_mm,visited\n";
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Vec3& p = c.samples()[i];
    out << c.cum_length()[i] << ',' << p.x() << ',' << p.y() << ',' << p.z() << ',' << c.radius()[i] << ','
        << static_cast<int>(c.visited()[i]) << '\n';
  }
  return out.str();
}

void write_centerline_csv(const Centerline& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  }
  out << to_csv(c);
}

Centerline parse_centerline_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("s_mm,x,y,z,radius_mm,visited", 0) != 0) {
    throw Error(ErrorCode::InvalidData, "missing centerline CSV header");
  }
  std::vector<Vec3> pts;
  std::vector<double> radius;
  std::vector<bool> visited;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double s, x, y, z, r;
    int v;
    if (!(fields >> s >> x >> y >> z >> r >> v)) {
      throw Error(ErrorCode::InvalidData, "bad centerline CSV line " + std::to_string(line_no));
    }
    pts.emplace_back(x, y, z);
    radius.push_back(r);
    visited.push_back(v != 0);
  }
  Centerline c(std::move(pts), std::move(radius));
  for (std::size_t i = 0; i < visited.size(); ++i) {
    if (visited[i]) c.mark_visited(c.cum_length()[i], c.cum_length()[i]);
  }
  return c;
}

}  // namespace ivc
