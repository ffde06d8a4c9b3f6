#include "ivc/session.h"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <sstream>

namespace ivc {

namespace {

using nlohmann::json;

constexpr std::array<std::pair<EventKind, std::string_view>, 13> kKindNames = {{
    {EventKind::Velocity, "velocity"},
    {EventKind::HeadPose, "head_pose"},
    {EventKind::Gaze, "gaze"},
    {EventKind::PointTeleport, "point_teleport"},
    {EventKind::PointBookmark, "point_bookmark"},
    {EventKind::PointMeasureA, "point_measure_a"},
    {EventKind::PointMeasureB, "point_measure_b"},
    {EventKind::PointSlice, "point_slice"},
    {EventKind::ToggleWim, "toggle_wim"},
    {EventKind::ToggleHeatmap, "toggle_heatmap"},
    {EventKind::GotoBookmark, "goto_bookmark"},
    {EventKind::StartAt, "start_at"},
    {EventKind::End, "end"},
}};

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 read_vec(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3) {
    throw Error(ErrorCode::ProtocolViolation, std::string("payload field '") + key + "' must be a 3-vector");
  }
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[key][i].is_number()) {
      throw Error(ErrorCode::ProtocolViolation, std::string("payload field '") + key + "' must be numeric");
    }
    v[i] = j[key][i].get<double>();
  }
  return v;
}

Ray read_ray(const json& j) { return {read_vec(j, "origin"), read_vec(j, "direction")}; }

void write_ray(json& j, const Ray& r) {
  j["origin"] = vec_json(r.origin);
  j["direction"] = vec_json(r.direction);
}

bool expects(EventKind kind, const EventPayload& p) {
  switch (kind) {
    case EventKind::Velocity: return std::holds_alternative<VelocityPayload>(p);
    case EventKind::HeadPose: return std::holds_alternative<HeadPosePayload>(p);
    case EventKind::Gaze: return std::holds_alternative<GazePayload>(p);
    case EventKind::PointTeleport:
    case EventKind::PointMeasureA:
    case EventKind::PointMeasureB:
    case EventKind::StartAt: return std::holds_alternative<RayPayload>(p);
    case EventKind::PointBookmark: return std::holds_alternative<BookmarkPayload>(p);
    case EventKind::PointSlice: return std::holds_alternative<SlicePayload>(p);
    case EventKind::GotoBookmark: return std::holds_alternative<GotoPayload>(p);
    case EventKind::ToggleWim:
    case EventKind::ToggleHeatmap:
    case EventKind::End: return std::holds_alternative<std::monostate>(p);
  }
  return false;
}

json payload_json(const EventPayload& p) {
  json j = json::object();
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, VelocityPayload>) {
          j["level"] = v.level;
        } else if constexpr (std::is_same_v<T, HeadPosePayload>) {
          j["eye"] = vec_json(v.eye);
          j["facing"] = vec_json(v.facing);
        } else if constexpr (std::is_same_v<T, GazePayload>) {
          j["direction"] = vec_json(v.direction);
        } else if constexpr (std::is_same_v<T, RayPayload>) {
          write_ray(j, v.ray);
        } else if constexpr (std::is_same_v<T, BookmarkPayload>) {
          write_ray(j, v.ray);
          j["class"] = std::string(to_string(v.anomaly));
          j["note"] = v.note;
        } else if constexpr (std::is_same_v<T, SlicePayload>) {
          write_ray(j, v.ray);
          j["plane"] = to_string(v.plane);
          j["window_center_hu"] = v.window_center_hu;
          j["window_width_hu"] = v.window_width_hu;
        } else if constexpr (std::is_same_v<T, GotoPayload>) {
          j["id"] = v.bookmark_id;
        }
      },
      p);
  return j;
}

EventPayload payload_from(EventKind kind, const json& j) {
  if (!j.is_object()) {
    throw Error(ErrorCode::ProtocolViolation, "payload must be an object");
  }
  try {
    switch (kind) {
      case EventKind::Velocity:
        if (!j.contains("level") || !j["level"].is_number_integer()) {
          throw Error(ErrorCode::ProtocolViolation, "velocity payload needs an integer 'level'");
        }
        return VelocityPayload{j["level"].get<int>()};
      case EventKind::HeadPose: return HeadPosePayload{read_vec(j, "eye"), read_vec(j, "facing")};
      case EventKind::Gaze: return GazePayload{read_vec(j, "direction")};
      case EventKind::PointTeleport:
      case EventKind::PointMeasureA:
      case EventKind::PointMeasureB:
      case EventKind::StartAt: return RayPayload{read_ray(j)};
      case EventKind::PointBookmark: {
        BookmarkPayload b;
        b.ray = read_ray(j);
        b.anomaly = anomaly_class_from_string(j.value("class", std::string("Unclassified")));
        b.note = j.value("note", std::string());
        return b;
      }
      case EventKind::PointSlice: {
        SlicePayload s;
        s.ray = read_ray(j);
        s.plane = slice_plane_from_string(j.value("plane", std::string("axial")));
        s.window_center_hu = j.value("window_center_hu", kDefaultWindowCenterHu);
        s.window_width_hu = j.value("window_width_hu", kDefaultWindowWidthHu);
        return s;
      }
      case EventKind::GotoBookmark:
        if (!j.contains("id") || !j["id"].is_number_integer()) {
          throw Error(ErrorCode::ProtocolViolation, "goto_bookmark payload needs an integer 'id'");
        }
        return GotoPayload{j["id"].get<int>()};
      case EventKind::ToggleWim:
      case EventKind::ToggleHeatmap:
      case EventKind::End: return std::monostate{};
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProtocolViolation, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ProtocolViolation) throw;
    throw Error(ErrorCode::ProtocolViolation, e.what());
  }
  return std::monostate{};
}

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void real(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void vec(const Vec3& v) {
    real(v.x());
    real(v.y());
    real(v.z());
  }
  void flag(bool b) { u64(b ? 1 : 0); }
  void text(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::string_view to_string(EventKind k) {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "end";
}

std::optional<EventKind> event_kind_from_string(std::string_view name) {
  for (const auto& [kind, n] : kKindNames) {
    if (n == name) return kind;
  }
  return std::nullopt;
}

SessionEvent make_event(double t, EventKind kind, EventPayload payload) {
  if (!expects(kind, payload)) {
    throw Error(ErrorCode::ProtocolViolation, "payload does not match event kind " + std::string(to_string(kind)));
  }
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw Error(ErrorCode::ProtocolViolation, "event time must be finite and non-negative");
  }
  return {t, kind, std::move(payload)};
}

std::string to_json_line(const LogEntry& entry) {
  json j;
  j["t"] = entry.event.t;
  j["kind"] = std::string(to_string(entry.event.kind));
  j["payload"] = payload_json(entry.event.payload);
  if (entry.rejected) {
    j["rejected"] = true;
    j["reason"] = entry.reason;
  }
  return j.dump();
}

EventPayload parse_payload(EventKind kind, const std::string& payload_json) {
  const json j = json::parse(payload_json, nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorCode::ProtocolViolation, "payload is not valid JSON");
  }
  return payload_from(kind, j);
}

LogEntry parse_log_line(std::string_view line) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::ProtocolViolation, "record is not a JSON object");
  }
  if (!j.contains("t") || !j["t"].is_number()) {
    throw Error(ErrorCode::ProtocolViolation, "record lacks numeric 't'");
  }
  if (!j.contains("kind") || !j["kind"].is_string()) {
    throw Error(ErrorCode::ProtocolViolation, "record lacks 'kind'");
  }
  const auto kind = event_kind_from_string(j["kind"].get<std::string>());
  if (!kind) {
    throw Error(ErrorCode::ProtocolViolation, "unknown event kind '" + j["kind"].get<std::string>() + "'");
  }
  LogEntry entry;
  entry.event = make_event(j["t"].get<double>(), *kind,
                           payload_from(*kind, j.contains("payload") ? j["payload"] : json::object()));
  entry.rejected = j.value("rejected", false);
  entry.reason = j.value("reason", std::string());
  return entry;
}

std::string to_jsonl(const std::vector<LogEntry>& log) {
  std::string out;
  for (const auto& e : log) {
    out += to_json_line(e);
    out += '\n';
  }
  return out;
}

std::vector<LogEntry> parse_jsonl(std::string_view text) {
  std::vector<LogEntry> log;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t next = text.find('\n', pos);
    if (next == std::string_view::npos) next = text.size();
    std::string_view line = text.substr(pos, next - pos);
    pos = next + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      log.push_back(parse_log_line(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::CorruptLog, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

SessionInputs SessionInputs::build(Volume volume, const Vec3& seed_start, const Vec3& seed_end,
                                   double air_threshold_hu) {
  SessionInputs in;
  in.volume = std::move(volume);
  const LumenMask mask = segment_lumen(in.volume, seed_start, air_threshold_hu);
  in.mesh = extract_isosurface(mask, in.volume);
  in.index = RayIndex(in.mesh);
  const DistanceField df = distance_transform(mask);
  in.centerline = extract_centerline(mask, df, seed_start, seed_end);
  return in;
}

SessionInputs SessionInputs::from_phantom(const Phantom& phantom) {
  return build(phantom.volume, phantom.seed_start, phantom.seed_end);
}

std::int64_t tick_of(double t) { return std::llround(t * kTickHz); }

Session::Session(const SessionInputs& inputs) : inputs_(&inputs) {
  state_.centerline = inputs.centerline;
  state_.coverage = CoverageMap::for_mesh(inputs.mesh);
  state_.nav.facing = tangent_at(inputs.centerline, 0.0);
}

void Session::tick() {
  if (state_.started) {
    const auto& cfg = inputs_->config;
    GazeSample g;
    g.origin = state_.nav.eye_position(state_.centerline);
    g.direction = state_.gaze_direction.value_or(state_.nav.facing);
    g.dt = kTickSeconds;
    accumulate(state_.coverage, inputs_->mesh, inputs_->index, g, cfg.gaze_cone);
    state_.nav = step(state_.nav, state_.centerline, kTickSeconds, cfg.navigation);
  }
  ++state_.tick;
}

void Session::advance_to_tick(std::int64_t target) {
  while (state_.tick < target) tick();
}

void Session::finish() { apply_now(EventKind::End); }

ApplyOutcome Session::apply_now(EventKind kind, EventPayload payload) {
  return apply(make_event(time(), kind, std::move(payload)));
}

ApplyOutcome Session::apply(const SessionEvent& e) {
  LogEntry entry{e, false, {}};
  const std::int64_t t = tick_of(e.t);
  if (t < state_.tick) {
    entry.rejected = true;
    entry.reason = "OutOfOrderEvent: event tick " + std::to_string(t) + " precedes " + std::to_string(state_.tick);
    log_.push_back(entry);
    return {false, ErrorCode::OutOfOrderEvent, entry.reason};
  }
  entry.event.t = static_cast<double>(t) * kTickSeconds;
  log_.push_back(entry);
  advance_to_tick(t);
  try {
    dispatch(entry.event);
  } catch (const Error& err) {
    log_.back().rejected = true;
    log_.back().reason = err.what();
    return {false, err.code(), err.what()};
  }
  return {};
}

void Session::dispatch(const SessionEvent& e) {
  const SessionInputs& in = *inputs_;
  SessionState& s = state_;
  auto hit_or_throw = [&](const Ray& r) {
    const auto hit = in.index.intersect(r.origin, r.direction);
    if (!hit) throw Error(ErrorCode::RayMiss, "pointing ray does not hit the colon wall");
    return *hit;
  };

  switch (e.kind) {
    case EventKind::StartAt:
    case EventKind::PointTeleport: {
      const auto& ray = std::get<RayPayload>(e.payload).ray;
      const auto result = teleport(s.nav, s.centerline, in.index, ray.origin, ray.direction);
      if (!result.hit) throw Error(ErrorCode::RayMiss, "teleport ray does not hit the colon wall");
      s.nav = result.state;
      if (e.kind == EventKind::StartAt && !s.started) {
        s.started = true;
        s.start_tick = s.tick;
      }
      break;
    }
    case EventKind::Velocity:
      s.nav = set_velocity_level(s.nav, std::get<VelocityPayload>(e.payload).level);
      break;
    case EventKind::HeadPose: {
      const auto& p = std::get<HeadPosePayload>(e.payload);
      s.nav = apply_head_pose(s.nav, p.eye, p.facing, s.centerline, in.config.navigation);
      break;
    }
    case EventKind::Gaze: {
      const auto& d = std::get<GazePayload>(e.payload).direction;
      if (!is_unit(d)) throw Error(ErrorCode::InvalidDirection, "gaze direction must be unit length");
      s.gaze_direction = d;
      break;
    }
    case EventKind::PointBookmark: {
      const auto& p = std::get<BookmarkPayload>(e.payload);
      s.annotations.add_bookmark(in.index, s.centerline, p.ray, p.anomaly, p.note, s.time());
      break;
    }
    case EventKind::PointMeasureA:
      s.pending_measure = hit_or_throw(std::get<RayPayload>(e.payload).ray).point;
      break;
    case EventKind::PointMeasureB: {
      if (!s.pending_measure) {
        throw Error(ErrorCode::MeasurementNotStarted, "point_measure_b without a pending first point");
      }
      const Vec3 b = hit_or_throw(std::get<RayPayload>(e.payload).ray).point;
      s.annotations.add_measurement(*s.pending_measure, b);
      s.pending_measure.reset();
      break;
    }
    case EventKind::PointSlice: {
      const auto& p = std::get<SlicePayload>(e.payload);
      const Vec3 at = hit_or_throw(p.ray).point;
      s.last_slice = extract_slice(in.volume, at, p.plane, p.window_center_hu, p.window_width_hu);
      break;
    }
    case EventKind::ToggleWim: s.wim_visible = !s.wim_visible; break;
    case EventKind::ToggleHeatmap: s.heatmap_visible = !s.heatmap_visible; break;
    case EventKind::GotoBookmark: {
      const int id = std::get<GotoPayload>(e.payload).bookmark_id;
      const Bookmark* b = s.annotations.find_bookmark(id);
      if (!b) throw Error(ErrorCode::UnknownBookmark, "no bookmark with id " + std::to_string(id));
      s.nav = goto_bookmark(s.nav, s.centerline, *b);
      break;
    }
    case EventKind::End: break;
  }
}

std::uint64_t Session::state_hash() const { return ivc::state_hash(state_); }

std::uint64_t state_hash(const SessionState& s) {
  Fnv1a h;
  h.i64(s.tick);
  h.flag(s.started);
  h.i64(s.start_tick);
  h.real(s.nav.s_mm);
  h.i64(s.nav.velocity_level);
  h.vec(s.nav.facing);
  h.vec(s.nav.head_offset_mm);
  h.i64(s.nav.travel_sign);
  h.u64(s.centerline.visited().size());
  h.bytes(s.centerline.visited().data(), s.centerline.visited().size());
  h.u64(static_cast<std::uint64_t>(s.coverage.dwell_s.size()));
  for (Eigen::Index i = 0; i < s.coverage.dwell_s.size(); ++i) h.real(s.coverage.dwell_s[i]);
  h.real(s.coverage.total_session_s);
  h.flag(s.gaze_direction.has_value());
  if (s.gaze_direction) h.vec(*s.gaze_direction);
  h.u64(s.annotations.bookmarks().size());
  for (const auto& b : s.annotations.bookmarks()) {
    h.i64(b.id);
    h.vec(b.surface_point);
    h.real(b.s_mm);
    h.i64(static_cast<int>(b.anomaly));
    h.text(b.note);
    h.real(b.created_at);
  }
  h.u64(s.annotations.measurements().size());
  for (const auto& m : s.annotations.measurements()) {
    h.i64(m.id);
    h.vec(m.point_a);
    h.vec(m.point_b);
    h.real(m.distance_mm);
  }
  h.flag(s.pending_measure.has_value());
  if (s.pending_measure) h.vec(*s.pending_measure);
  h.flag(s.wim_visible);
  h.flag(s.heatmap_visible);
  h.flag(s.last_slice.has_value());
  if (s.last_slice) {
    h.i64(static_cast<int>(s.last_slice->plane));
    h.i64(s.last_slice->index);
    h.i64(s.last_slice->crosshair.x());
    h.i64(s.last_slice->crosshair.y());
    h.real(s.last_slice->window_center_hu);
    h.real(s.last_slice->window_width_hu);
  }
  return h.value();
}

ReplayResult replay(const std::vector<LogEntry>& log, const SessionInputs& inputs) {
  Session session(inputs);
  // Rejected entries are re-applied too: they fail the same way and keep the clock in step.
  for (const auto& entry : log) session.apply(entry.event);
  return {session.state(), session.state_hash()};
}

ReplayResult replay(std::string_view jsonl, const SessionInputs& inputs) { return replay(parse_jsonl(jsonl), inputs); }

Eigen::Affine3d wim_transform(const Mesh& mesh, double box_mm, const Vec3& attach_mm) {
  Eigen::AlignedBox3d box;
  for (const auto& v : mesh.vertices) box.extend(v);
  const double extent = box.isEmpty() ? 1.0 : box.sizes().maxCoeff();
  const double scale = extent > 0.0 ? box_mm / extent : 1.0;
  Eigen::Affine3d t = Eigen::Affine3d::Identity();
  t.translate(attach_mm);
  t.scale(scale);
  t.translate(box.isEmpty() ? Vec3::Zero() : Vec3(-box.center()));
  return t;
}

}  // namespace ivc
