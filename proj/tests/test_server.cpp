#include "fixtures.h"

#include "ivc/server.h"
#include "ivc/wire.h"

#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <future>
#include <thread>

using namespace ivc;
using nlohmann::json;

namespace {

const SessionInputs& inputs() { return fixture::straight_inputs(); }

int connect_to(int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(static_cast<std::uint16_t>(port));
  ::inet_pton(AF_INET, "127.0.0.1", &a.sin_addr);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&a), sizeof a) == 0);
  timeval tv{5, 0};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  return fd;
}

void send_all(int fd, const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    const ssize_t n = ::send(fd, s.data() + off, s.size() - off, MSG_NOSIGNAL);
    REQUIRE(n > 0);
    off += static_cast<std::size_t>(n);
  }
}

// Minimal length-prefixed client.
struct TcpClient {
  int fd;
  std::string buf;
  FrameDecoder frames;

  std::optional<json> next() {
    for (;;) {
      if (auto m = frames.next()) return json::parse(*m);
      char chunk[65536];
      const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n <= 0) return std::nullopt;
      frames.feed(std::string_view(chunk, static_cast<std::size_t>(n)));
    }
  }
  void send(const json& j) { send_all(fd, encode_frame(j.dump())); }
};

// Minimal WebSocket client: masked text frames out, unmasked frames in.
struct WsClient {
  int fd;
  std::string buf;

  bool fill(std::size_t n) {
    char chunk[65536];
    while (buf.size() < n) {
      const ssize_t r = ::recv(fd, chunk, sizeof chunk, 0);
      if (r <= 0) return false;
      buf.append(chunk, static_cast<std::size_t>(r));
    }
    return true;
  }

  std::string handshake(const std::string& key) {
    send_all(fd, "GET /ivc HTTP/1.1\r\nHost: localhost\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                 "sec-websocket-key: " + key + "\r\nSec-WebSocket-Version: 13\r\n\r\n");
    while (buf.find("\r\n\r\n") == std::string::npos) {
      if (!fill(buf.size() + 1)) return {};
    }
    const std::size_t end = buf.find("\r\n\r\n") + 4;
    std::string head = buf.substr(0, end);
    buf.erase(0, end);
    return head;
  }

  // Returns (opcode, payload).
  std::optional<std::pair<int, std::string>> frame() {
    if (!fill(2)) return std::nullopt;
    const int opcode = buf[0] & 0x0f;
    const auto b = [&](std::size_t i) { return static_cast<std::uint8_t>(buf[i]); };
    CHECK((b(1) & 0x80) == 0);
    std::uint64_t len = b(1) & 0x7f;
    std::size_t pos = 2;
    if (len == 126) {
      if (!fill(4)) return std::nullopt;
      len = (std::uint64_t{b(2)} << 8) | b(3);
      pos = 4;
    } else if (len == 127) {
      if (!fill(10)) return std::nullopt;
      len = 0;
      for (int i = 0; i < 8; ++i) len = (len << 8) | b(2 + i);
      pos = 10;
    }
    if (!fill(pos + len)) return std::nullopt;
    std::string payload = buf.substr(pos, len);
    buf.erase(0, pos + len);
    return std::make_pair(opcode, payload);
  }

  std::optional<json> next() {
    for (;;) {
      auto f = frame();
      if (!f) return std::nullopt;
      if (f->first == 0x1) return json::parse(f->second);
      if (f->first == 0x8) return std::nullopt;
    }
  }

  void send_frame(const std::string& payload, int opcode, bool fin = true) {
    std::string f;
    f.push_back(static_cast<char>((fin ? 0x80 : 0) | opcode));
    if (payload.size() < 126) {
      f.push_back(static_cast<char>(0x80 | payload.size()));
    } else {
      f.push_back(static_cast<char>(0x80 | 126));
      f.push_back(static_cast<char>(payload.size() >> 8));
      f.push_back(static_cast<char>(payload.size() & 0xff));
    }
    const std::uint8_t key[4] = {0x37, 0xfa, 0x21, 0x3d};
    for (auto k : key) f.push_back(static_cast<char>(k));
    for (std::size_t i = 0; i < payload.size(); ++i) f.push_back(static_cast<char>(payload[i] ^ key[i % 4]));
    send_all(fd, f);
  }
};

struct Running {
  std::future<ServeResult> result;
  int port;
};

Running start(ServeOptions opt) {
  auto ready = std::make_shared<std::promise<int>>();
  auto port = ready->get_future();
  opt.port = 0;
  opt.on_listening = [ready](int p) { ready->set_value(p); };
  auto fut = std::async(std::launch::async, [opt] { return serve(inputs(), opt); });
  return {std::move(fut), port.get()};
}

json ray_json(const Vec3& o, const Vec3& d) {
  return {{"origin", {o.x(), o.y(), o.z()}}, {"direction", {d.x(), d.y(), d.z()}}};
}

}  // namespace

TEST_CASE("websocket accept key") {
  CHECK(websocket_accept_key("dGhlIHNhbXBsZSBub25jZQ==") == "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
}

TEST_CASE("tcp session: hello, velocity, snapshots, replayable log") {
  auto run = start({});
  TcpClient c{connect_to(run.port), {}, {}};
  const auto hello = c.next();
  REQUIRE(hello);
  CHECK((*hello)["kind"] == "hello");
  CHECK((*hello)["tick_hz"] == 72);

  const Vec3 o = inputs().centerline.point_at(30.0);
  c.send({{"kind", "start_at"}, {"payload", ray_json(o, Vec3::UnitY())}});
  c.send({{"kind", "velocity"}, {"payload", {{"level", 2}}}});
  bool seen = false;
  double last_t = -1.0;
  for (int i = 0; i < 400 && !seen; ++i) {
    const auto m = c.next();
    REQUIRE(m);
    if ((*m)["kind"] != "snapshot") continue;
    const double t = (*m)["t"];
    CHECK(t > last_t);
    last_t = t;
    seen = (*m)["velocity_level"] == 2;
  }
  CHECK(seen);
  // Let the camera travel a little before hanging up.
  for (int i = 0; i < 20; ++i) REQUIRE(c.next());
  ::close(c.fd);

  const ServeResult r = run.result.get();
  CHECK_FALSE(r.websocket);
  CHECK_FALSE(r.protocol_error);
  CHECK(r.ticks > 20);
  CHECK(r.log.back().event.kind == EventKind::End);
  CHECK(replay(r.log, inputs()).hash == r.final_hash);
}

TEST_CASE("tcp session: malformed message gets an error frame, then the connection closes") {
  auto run = start({});
  TcpClient c{connect_to(run.port), {}, {}};
  REQUIRE(c.next());
  c.send(json{{"kind", "velocity"}, {"payload", {{"level", "max"}}}});
  std::optional<json> err;
  for (int i = 0; i < 1000; ++i) {
    auto m = c.next();
    if (!m) break;
    if ((*m)["kind"] == "error") err = m;
  }
  REQUIRE(err);
  CHECK((*err)["code"] == "ProtocolViolation");
  ::close(c.fd);
  const ServeResult r = run.result.get();
  CHECK(r.protocol_error);
}

TEST_CASE("tcp session: oversized length prefix is a protocol violation") {
  auto run = start({});
  TcpClient c{connect_to(run.port), {}, {}};
  REQUIRE(c.next());
  send_all(c.fd, std::string("\x7f\x00\x00\x00", 4));
  std::optional<json> err;
  while (auto m = c.next()) {
    if ((*m)["kind"] == "error") err = m;
  }
  REQUIRE(err);
  CHECK((*err)["code"] == "ProtocolViolation");
  ::close(c.fd);
  CHECK(run.result.get().protocol_error);
}

TEST_CASE("websocket session") {
  auto run = start({});
  WsClient c{connect_to(run.port), {}};
  const std::string head = c.handshake("dGhlIHNhbXBsZSBub25jZQ==");
  CHECK(head.rfind("HTTP/1.1 101", 0) == 0);
  CHECK(head.find("Sec-WebSocket-Accept: s3pPLMBiTxaQ9kYGzzhZRbK+xOo=") != std::string::npos);
  const auto hello = c.next();
  REQUIRE(hello);
  CHECK((*hello)["kind"] == "hello");

  const Vec3 o = inputs().centerline.point_at(30.0);
  const std::string start_at = json{{"kind", "start_at"}, {"payload", ray_json(o, Vec3::UnitY())}}.dump();
  // Fragmented text message.
  c.send_frame(start_at.substr(0, 10), 0x1, false);
  c.send_frame(start_at.substr(10), 0x0, true);
  c.send_frame("ping!", 0x9);
  c.send_frame(json{{"kind", "velocity"}, {"payload", {{"level", 4}}}}.dump(), 0x1);

  bool pong = false, seen = false;
  for (int i = 0; i < 600 && !(pong && seen); ++i) {
    auto f = c.frame();
    REQUIRE(f);
    if (f->first == 0xA) {
      pong = true;
      CHECK(f->second == "ping!");
    } else if (f->first == 0x1) {
      const json m = json::parse(f->second);
      if (m["kind"] == "snapshot" && m["velocity_level"] == 4) seen = true;
    }
  }
  CHECK(pong);
  CHECK(seen);

  c.send_frame(std::string("\x03\xe8", 2), 0x8);
  bool closed = false;
  while (auto f = c.frame()) {
    if (f->first == 0x8) closed = true;
  }
  CHECK(closed);
  ::close(c.fd);
  const ServeResult r = run.result.get();
  CHECK(r.websocket);
  CHECK_FALSE(r.protocol_error);
  CHECK(replay(r.log, inputs()).hash == r.final_hash);
}

TEST_CASE("websocket upgrade without a key is refused") {
  auto run = start({});
  const int fd = connect_to(run.port);
  send_all(fd, "GET / HTTP/1.1\r\nHost: x\r\nUpgrade: websocket\r\n\r\n");
  char chunk[256];
  const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
  REQUIRE(n > 0);
  CHECK(std::string(chunk, static_cast<std::size_t>(n)).rfind("HTTP/1.1 400", 0) == 0);
  ::close(fd);
  CHECK(run.result.get().protocol_error);
}

TEST_CASE("bind failure on an occupied port") {
  const int holder = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = 0;
  ::inet_pton(AF_INET, "127.0.0.1", &a.sin_addr);
  REQUIRE(::bind(holder, reinterpret_cast<sockaddr*>(&a), sizeof a) == 0);
  REQUIRE(::listen(holder, 1) == 0);
  socklen_t len = sizeof a;
  ::getsockname(holder, reinterpret_cast<sockaddr*>(&a), &len);
  ServeOptions opt;
  opt.port = ntohs(a.sin_port);
  CHECK(fixture::code_of([&] { serve(inputs(), opt); }) == ErrorCode::BindFailure);
  opt.bind_address = "not an address";
  CHECK(fixture::code_of([&] { serve(inputs(), opt); }) == ErrorCode::BindFailure);
  ::close(holder);
}

TEST_CASE("log file is written on disconnect") {
  const auto path = std::filesystem::temp_directory_path() / "ivc_server_test.jsonl";
  std::filesystem::remove(path);
  ServeOptions opt;
  opt.log_path = path;
  opt.realtime = false;
  opt.max_ticks = 30;
  auto run = start(opt);
  TcpClient c{connect_to(run.port), {}, {}};
  c.send({{"kind", "velocity"}, {"payload", {{"level", 1}}}});
  while (c.next()) {
  }
  ::close(c.fd);
  const ServeResult r = run.result.get();
  CHECK(r.ticks == 30);
  REQUIRE(std::filesystem::exists(path));
  std::ifstream in(path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(replay(text, inputs()).hash == r.final_hash);
  std::filesystem::remove(path);
}

TEST_CASE("viewer loop: level 4 flight visits the whole mid-line and heatmap bytes match") {
  auto run = start({});
  TcpClient c{connect_to(run.port), {}, {}};
  REQUIRE(c.next());
  const Centerline& line = inputs().centerline;
  c.send({{"kind", "start_at"}, {"payload", ray_json(line.point_at(0.0), -Vec3::UnitX())}});
  c.send({{"kind", "velocity"}, {"payload", {{"level", 4}}}});
  const double flight_s = line.total_length() / 40.0;
  double t0 = -1.0, visited = 0.0;
  for (;;) {
    const auto m = c.next();
    REQUIRE(m);
    if ((*m)["kind"] != "snapshot" || (*m)["velocity_level"] != 4) continue;
    if (t0 < 0.0) t0 = (*m)["t"];
    visited = (*m)["visited_fraction"];
    if ((*m)["t"].get<double>() - t0 >= flight_s + kTickSeconds) break;
  }
  CHECK(visited == 1.0);

  c.send({{"kind", "toggle_heatmap"}, {"payload", json::object()}});
  std::optional<json> heat;
  while (!heat) {
    const auto m = c.next();
    REQUIRE(m);
    if ((*m)["kind"] == "heatmap") heat = m;
  }
  ::close(c.fd);
  const ServeResult r = run.result.get();

  // State at the toggle: replay the log up to that entry.
  std::vector<LogEntry> prefix;
  for (const LogEntry& e : r.log) {
    prefix.push_back(e);
    if (e.event.kind == EventKind::ToggleHeatmap) break;
  }
  REQUIRE(prefix.back().event.kind == EventKind::ToggleHeatmap);
  const auto state = replay(prefix, inputs()).state;
  const auto colors = heatmap_colors(state.coverage);
  const auto bytes = base64_decode((*heat)["colors"].get<std::string>());
  REQUIRE(bytes.size() == 3 * colors.size());
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < colors.size(); ++i) {
    for (int k = 0; k < 3; ++k) mismatched += bytes[3 * i + k] != colors[i][k];
  }
  CHECK(mismatched == 0);
}
