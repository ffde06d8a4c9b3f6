#pragma once

#include "ivc/session.h"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ivc {

struct ServeOptions {
  std::string bind_address = "127.0.0.1";
  int port = 7272;  // 0 picks an ephemeral port
  std::optional<std::filesystem::path> log_path;
  /// Called with the bound port once the socket listens.
  std::function<void(int)> on_listening;
  /// Sleep to hold 72 Hz; off runs ticks back to back.
  bool realtime = true;
  /// Stops after this many ticks; negative runs until disconnect.
  std::int64_t max_ticks = -1;
};

struct ServeResult {
  std::vector<LogEntry> log;
  std::uint64_t final_hash = 0;
  std::int64_t ticks = 0;
  bool websocket = false;
  std::optional<std::string> protocol_error;
};

/// Serves one viewer connection. The transport is sniffed from the first
/// bytes: an HTTP upgrade selects WebSocket text frames, anything else
/// length-prefixed TCP. Throws BindFailure when the port is unavailable.
ServeResult serve(const SessionInputs& inputs, const ServeOptions& options);

/// WebSocket accept key for a client key.
std::string websocket_accept_key(const std::string& client_key);

}  // namespace ivc
