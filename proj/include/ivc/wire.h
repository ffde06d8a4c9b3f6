#pragma once

#include "ivc/session.h"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ivc {

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// 4-byte big-endian length followed by the UTF-8 JSON body.
std::string encode_frame(std::string_view payload);

inline constexpr std::size_t kMaxFrameBytes = 64u << 20;

/// Incremental decoder for length-prefixed frames.
class FrameDecoder {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }
  /// Next complete frame; ProtocolViolation on oversized lengths.
  std::optional<std::string> next();

 private:
  std::string buffer_;
};

nlohmann::json error_message(ErrorCode code, const std::string& message);

/// Server side of the viewer protocol, independent of the transport.
/// Client messages are {"kind": <event kind>, "payload": {...}} or
/// {"kind": "request", "what": "heatmap"|"bookmarks"|"wim"|"slice"}.
class WireSession {
 public:
  explicit WireSession(const SessionInputs& inputs);

  /// First message: mesh as OBJ text and the centerline CSV.
  nlohmann::json handshake() const;

  /// Applies one client message at the current tick and returns the
  /// replies. Throws ProtocolViolation for malformed messages.
  std::vector<nlohmann::json> handle(std::string_view message);

  /// Advances one tick and returns the snapshot for it.
  nlohmann::json tick();

  nlohmann::json snapshot() const;
  nlohmann::json heatmap_message() const;
  nlohmann::json bookmarks_message() const;
  nlohmann::json wim_message() const;
  std::optional<nlohmann::json> slice_message() const;

  Session& session() { return session_; }
  const Session& session() const { return session_; }

 private:
  Session session_;
};

}  // namespace ivc
