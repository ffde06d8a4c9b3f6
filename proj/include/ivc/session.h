#pragma once

#include "ivc/annotations.h"
#include "ivc/centerline.h"
#include "ivc/coverage.h"
#include "ivc/error.h"
#include "ivc/navigation.h"
#include "ivc/phantom.h"
#include "ivc/ray_index.h"
#include "ivc/surface.h"
#include "ivc/volume.h"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ivc {

inline constexpr int kTickHz = 72;
inline constexpr double kTickSeconds = 1.0 / kTickHz;

enum class EventKind {
  Velocity,
  HeadPose,
  Gaze,
  PointTeleport,
  PointBookmark,
  PointMeasureA,
  PointMeasureB,
  PointSlice,
  ToggleWim,
  ToggleHeatmap,
  GotoBookmark,
  StartAt,
  End,  // session-control marker: the clock ran until this tick
};

std::string_view to_string(EventKind k);
std::optional<EventKind> event_kind_from_string(std::string_view name);

struct VelocityPayload {
  int level = 0;
};
struct HeadPosePayload {
  Vec3 eye = Vec3::Zero();
  Vec3 facing = Vec3::UnitX();
};
struct GazePayload {
  Vec3 direction = Vec3::UnitX();
};
struct RayPayload {
  Ray ray;
};
struct BookmarkPayload {
  Ray ray;
  AnomalyClass anomaly = AnomalyClass::Unclassified;
  std::string note;
};
struct SlicePayload {
  Ray ray;
  SlicePlane plane = SlicePlane::Axial;
  double window_center_hu = kDefaultWindowCenterHu;
  double window_width_hu = kDefaultWindowWidthHu;
};
struct GotoPayload {
  int bookmark_id = 0;
};

using EventPayload = std::variant<std::monostate, VelocityPayload, HeadPosePayload, GazePayload, RayPayload,
                                  BookmarkPayload, SlicePayload, GotoPayload>;

struct SessionEvent {
  double t = 0.0;
  EventKind kind = EventKind::End;
  EventPayload payload;
};

/// Throws ProtocolViolation when the payload does not fit the kind.
SessionEvent make_event(double t, EventKind kind, EventPayload payload = {});

struct LogEntry {
  SessionEvent event;
  bool rejected = false;
  std::string reason;
};

/// One JSON Lines record: {"t":..,"kind":..,"payload":{..}[,"rejected":true,"reason":..]}.
std::string to_json_line(const LogEntry& entry);
/// Parses one record; throws ProtocolViolation on malformed input.
LogEntry parse_log_line(std::string_view line);
/// Parses a payload object for `kind` (shared with the wire protocol).
EventPayload parse_payload(EventKind kind, const std::string& payload_json);

std::string to_jsonl(const std::vector<LogEntry>& log);
/// CorruptLog with the 1-based line number on any malformed record.
std::vector<LogEntry> parse_jsonl(std::string_view text);

struct SessionConfig {
  NavigationConfig navigation;
  GazeConeConfig gaze_cone;
  double t_sat_s = kDefaultSaturationS;
  double tau_s = kDefaultCoverageTauS;
  double wim_box_mm = 300.0;
};

/// Immutable artifacts a session reads: CT, wall mesh, its ray index and
/// the mid-line.
struct SessionInputs {
  Volume volume;
  Mesh mesh;
  RayIndex index;
  Centerline centerline;
  SessionConfig config;

  /// Segments, meshes and extracts the mid-line between the two seeds.
  static SessionInputs build(Volume volume, const Vec3& seed_start, const Vec3& seed_end,
                             double air_threshold_hu = kDefaultAirThresholdHu);
  static SessionInputs from_phantom(const Phantom& phantom);
};

struct SessionState {
  std::int64_t tick = 0;
  bool started = false;
  std::int64_t start_tick = 0;
  NavState nav;
  Centerline centerline;
  CoverageMap coverage;
  std::optional<Vec3> gaze_direction;
  Annotations annotations;
  std::optional<Vec3> pending_measure;
  bool wim_visible = false;
  bool heatmap_visible = false;
  std::optional<SliceImage> last_slice;

  double time() const { return static_cast<double>(tick) * kTickSeconds; }
};

struct ApplyOutcome {
  bool accepted = true;
  std::optional<ErrorCode> error;
  std::string reason;
};

/// Single-writer fixed-timestep engine. Every applied event is logged
/// before it takes effect; rejected ones are logged with the reason.
class Session {
 public:
  explicit Session(const SessionInputs& inputs);

  const SessionInputs& inputs() const { return *inputs_; }
  const SessionState& state() const { return state_; }
  const std::vector<LogEntry>& log() const { return log_; }
  double time() const { return state_.time(); }

  /// Runs ticks up to the event's tick, then applies it.
  ApplyOutcome apply(const SessionEvent& e);
  /// Applies at the current tick (live input).
  ApplyOutcome apply_now(EventKind kind, EventPayload payload = {});

  void tick();
  void advance_to_tick(std::int64_t tick);
  /// Logs the End marker at the current tick.
  void finish();

  std::uint64_t state_hash() const;

 private:
  void dispatch(const SessionEvent& e);

  const SessionInputs* inputs_;
  SessionState state_;
  std::vector<LogEntry> log_;
};

std::int64_t tick_of(double t);

/// FNV-1a 64 over a canonical little-endian serialization of the state.
std::uint64_t state_hash(const SessionState& s);

struct ReplayResult {
  SessionState state;
  std::uint64_t hash = 0;
};

ReplayResult replay(const std::vector<LogEntry>& log, const SessionInputs& inputs);
ReplayResult replay(std::string_view jsonl, const SessionInputs& inputs);

/// Uniform scale into a wim_box_mm cube centered on the attachment point.
Eigen::Affine3d wim_transform(const Mesh& mesh, double box_mm, const Vec3& attach_mm = Vec3::Zero());

}  // namespace ivc
