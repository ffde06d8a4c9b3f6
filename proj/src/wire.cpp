#include "ivc/wire.h"

#include <openssl/evp.h>

#include <cmath>

namespace ivc {

namespace {

using nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) {
    throw Error(ErrorCode::ProtocolViolation, "base64 length must be a multiple of 4");
  }
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) {
    throw Error(ErrorCode::ProtocolViolation, "invalid base64");
  }
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string encode_frame(std::string_view payload) {
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(payload.size() + 4);
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(payload);
  return out;
}

std::optional<std::string> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  const auto b = [&](int i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer_[i])); };
  const std::uint32_t n = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
  if (n > kMaxFrameBytes) {
    throw Error(ErrorCode::ProtocolViolation, "frame of " + std::to_string(n) + " bytes exceeds the limit");
  }
  if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string payload = buffer_.substr(4, n);
  buffer_.erase(0, 4 + static_cast<std::size_t>(n));
  return payload;
}

json error_message(ErrorCode code, const std::string& message) {
  return {{"kind", "error"}, {"code", std::string(to_string(code))}, {"message", message}};
}

WireSession::WireSession(const SessionInputs& inputs) : session_(inputs) {}

json WireSession::handshake() const {
  const auto& in = session_.inputs();
  return {{"kind", "hello"},
          {"tick_hz", kTickHz},
          {"mesh_obj", to_obj(in.mesh)},
          {"centerline_csv", to_csv(session_.state().centerline)},
          {"velocity_levels_mm_s", in.config.navigation.speeds_mm_s}};
}

json WireSession::snapshot() const {
  const SessionState& s = session_.state();
  return {{"kind", "snapshot"},
          {"tick", s.tick},
          {"t", s.time()},
          {"s_mm", s.nav.s_mm},
          {"eye", vec_json(s.nav.eye_position(s.centerline))},
          {"facing", vec_json(s.nav.facing)},
          {"velocity_level", s.nav.velocity_level},
          {"visited_fraction", s.centerline.visited_fraction()}};
}

json WireSession::heatmap_message() const {
  const auto& cfg = session_.inputs().config;
  const auto colors = heatmap_colors(session_.state().coverage, cfg.t_sat_s);
  std::vector<std::uint8_t> bytes;
  bytes.reserve(colors.size() * 3);
  for (const auto& c : colors) bytes.insert(bytes.end(), c.begin(), c.end());
  return {{"kind", "heatmap"},
          {"visible", session_.state().heatmap_visible},
          {"t_sat", cfg.t_sat_s},
          {"colors", base64_encode(bytes)}};
}

json WireSession::bookmarks_message() const {
  json marks = json::array();
  for (const auto& b : session_.state().annotations.bookmarks()) {
    marks.push_back({{"id", b.id},
                     {"s_mm", b.s_mm},
                     {"point", vec_json(b.surface_point)},
                     {"class", std::string(to_string(b.anomaly))},
                     {"note", b.note},
                     {"created_at", b.created_at}});
  }
  json measures = json::array();
  for (const auto& m : session_.state().annotations.measurements()) {
    measures.push_back(
        {{"id", m.id}, {"a", vec_json(m.point_a)}, {"b", vec_json(m.point_b)}, {"distance_mm", m.distance_mm}});
  }
  return {{"kind", "bookmarks"}, {"bookmarks", marks}, {"measurements", measures}};
}

json WireSession::wim_message() const {
  const auto& in = session_.inputs();
  const Eigen::Affine3d t = wim_transform(in.mesh, in.config.wim_box_mm);
  const Eigen::Matrix4d m = t.matrix();
  std::vector<double> flat(m.data(), m.data() + 16);
  return {{"kind", "wim"}, {"visible", session_.state().wim_visible}, {"matrix", flat}};
}

std::optional<json> WireSession::slice_message() const {
  const auto& slice = session_.state().last_slice;
  if (!slice) return std::nullopt;
  const auto w = static_cast<int>(slice->pixels.rows());
  const auto h = static_cast<int>(slice->pixels.cols());
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(w) * h);
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      gray[static_cast<std::size_t>(j) * w + i] = static_cast<std::uint8_t>(std::lround(255.0 * slice->pixels(i, j)));
    }
  }
  return json{{"kind", "slice"},
              {"plane", to_string(slice->plane)},
              {"index", slice->index},
              {"width", w},
              {"height", h},
              {"pixels", base64_encode(gray)},
              {"crosshair", {slice->crosshair.x(), slice->crosshair.y()}},
              {"window_center_hu", slice->window_center_hu},
              {"window_width_hu", slice->window_width_hu}};
}

std::vector<json> WireSession::handle(std::string_view message) {
  const json msg = json::parse(message, nullptr, false);
  if (msg.is_discarded() || !msg.is_object()) {
    throw Error(ErrorCode::ProtocolViolation, "message is not a JSON object");
  }
  if (!msg.contains("kind") || !msg["kind"].is_string()) {
    throw Error(ErrorCode::ProtocolViolation, "message lacks a string 'kind'");
  }
  const std::string kind_name = msg["kind"].get<std::string>();

  if (kind_name == "request") {
    const std::string what = msg.value("what", std::string());
    if (what == "heatmap") return {heatmap_message()};
    if (what == "bookmarks") return {bookmarks_message()};
    if (what == "wim") return {wim_message()};
    if (what == "slice") {
      if (auto s = slice_message()) return {*s};
      return {};
    }
    throw Error(ErrorCode::ProtocolViolation, "unknown request '" + what + "'");
  }

  const auto kind = event_kind_from_string(kind_name);
  if (!kind || *kind == EventKind::End) {
    throw Error(ErrorCode::ProtocolViolation, "unknown message kind '" + kind_name + "'");
  }
  const json payload = msg.contains("payload") ? msg["payload"] : json::object();
  EventPayload p = parse_payload(*kind, payload.dump());

  const ApplyOutcome outcome = session_.apply_now(*kind, std::move(p));
  if (!outcome.accepted) {
    return {{{"kind", "rejected"}, {"event", kind_name}, {"reason", outcome.reason}}};
  }
  std::vector<json> replies;
  switch (*kind) {
    case EventKind::PointSlice:
      replies.push_back(*slice_message());
      break;
    case EventKind::ToggleHeatmap:
      if (session_.state().heatmap_visible) replies.push_back(heatmap_message());
      break;
    case EventKind::ToggleWim:
      replies.push_back(wim_message());
      break;
    case EventKind::PointBookmark:
    case EventKind::PointMeasureB:
      replies.push_back(bookmarks_message());
      break;
    default:
      break;
  }
  return replies;
}

json WireSession::tick() {
  session_.tick();
  return snapshot();
}

}  // namespace ivc
