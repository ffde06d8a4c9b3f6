#include "ivc/server.h"

#include "ivc/wire.h"

#include <openssl/sha.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <deque>
#include <fstream>
#include <mutex>
#include <thread>
#include <variant>

namespace ivc {

namespace {

using nlohmann::json;

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  int get() const { return fd_; }

 private:
  int fd_;
};

bool send_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string ws_text_frame(std::string_view payload, std::uint8_t opcode = 0x1) {
  std::string out;
  out.push_back(static_cast<char>(0x80 | opcode));
  const std::size_t n = payload.size();
  if (n < 126) {
    out.push_back(static_cast<char>(n));
  } else if (n <= 0xffff) {
    out.push_back(126);
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
  } else {
    out.push_back(127);
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((n >> (8 * i)) & 0xff));
  }
  out.append(payload);
  return out;
}

// Incoming item from the reader thread.
struct Inbound {
  std::string message;
  bool protocol_error = false;
};

class Connection {
 public:
  Connection(int fd, bool websocket) : fd_(fd), websocket_(websocket) {}

  bool send_message(const json& msg) {
    const std::string body = msg.dump();
    std::lock_guard lock(send_mutex_);
    return send_all(fd_, websocket_ ? ws_text_frame(body) : encode_frame(body));
  }

  bool send_raw(std::string_view bytes) {
    std::lock_guard lock(send_mutex_);
    return send_all(fd_, bytes);
  }

  // Runs on the reader thread until EOF or a framing error.
  void read_loop(std::string initial) {
    std::string buffer = std::move(initial);
    FrameDecoder frames;
    std::string fragments;
    char chunk[8192];
    bool first = true;
    for (;;) {
      if (!first || buffer.empty()) {
        const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));
      }
      first = false;
      try {
        if (websocket_) {
          if (!drain_websocket(buffer, fragments)) break;
        } else {
          frames.feed(buffer);
          buffer.clear();
          while (auto m = frames.next()) push({std::move(*m), false});
        }
      } catch (const Error& e) {
        push({e.what(), true});
        break;
      }
    }
    closed_ = true;
  }

  std::deque<Inbound> take() {
    std::lock_guard lock(queue_mutex_);
    std::deque<Inbound> out;
    out.swap(queue_);
    return out;
  }

  bool closed() const { return closed_; }

  void shutdown() { ::shutdown(fd_, SHUT_RDWR); }

 private:
  void push(Inbound in) {
    std::lock_guard lock(queue_mutex_);
    queue_.push_back(std::move(in));
  }

  // Returns false on a close frame.
  bool drain_websocket(std::string& buf, std::string& fragments) {
    for (;;) {
      if (buf.size() < 2) return true;
      const auto byte = [&](std::size_t i) { return static_cast<std::uint8_t>(buf[i]); };
      const bool fin = byte(0) & 0x80;
      const std::uint8_t opcode = byte(0) & 0x0f;
      const bool masked = byte(1) & 0x80;
      std::uint64_t len = byte(1) & 0x7f;
      std::size_t pos = 2;
      if (len == 126) {
        if (buf.size() < 4) return true;
        len = (std::uint64_t{byte(2)} << 8) | byte(3);
        pos = 4;
      } else if (len == 127) {
        if (buf.size() < 10) return true;
        len = 0;
        for (int i = 0; i < 8; ++i) len = (len << 8) | byte(2 + i);
        pos = 10;
      }
      if (!masked) throw Error(ErrorCode::ProtocolViolation, "client frames must be masked");
      if (len > kMaxFrameBytes) throw Error(ErrorCode::ProtocolViolation, "frame exceeds the limit");
      if (buf.size() < pos + 4 + len) return true;
      std::uint8_t key[4];
      for (int i = 0; i < 4; ++i) key[i] = byte(pos + i);
      pos += 4;
      std::string payload = buf.substr(pos, len);
      for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<char>(payload[i] ^ key[i % 4]);
      buf.erase(0, pos + len);

      switch (opcode) {
        case 0x0:
        case 0x1:
        case 0x2:
          fragments += payload;
          if (fin) {
            push({std::move(fragments), false});
            fragments.clear();
          }
          break;
        case 0x8:
          send_raw(ws_text_frame(payload.substr(0, std::min<std::size_t>(payload.size(), 2)), 0x8));
          return false;
        case 0x9:
          send_raw(ws_text_frame(payload, 0xA));
          break;
        case 0xA:
          break;
        default:
          throw Error(ErrorCode::ProtocolViolation, "unknown websocket opcode");
      }
    }
  }

  int fd_;
  bool websocket_;
  std::mutex send_mutex_;
  std::mutex queue_mutex_;
  std::deque<Inbound> queue_;
  std::atomic<bool> closed_{false};
};

// Reads until the end of the HTTP request headers; returns the rest.
std::optional<std::string> read_http_request(int fd, std::string& buffer) {
  char chunk[4096];
  while (buffer.find("\r\n\r\n") == std::string::npos) {
    if (buffer.size() > 65536) return std::nullopt;
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
  const std::size_t end = buffer.find("\r\n\r\n") + 4;
  std::string head = buffer.substr(0, end);
  buffer.erase(0, end);
  return head;
}

std::optional<std::string> header_value(const std::string& head, const std::string& name) {
  const std::string l = lower(head);
  const std::string key = "\r\n" + lower(name) + ":";
  const std::size_t at = l.find(key);
  if (at == std::string::npos) return std::nullopt;
  std::size_t b = at + key.size();
  const std::size_t e = head.find("\r\n", b);
  while (b < e && (head[b] == ' ' || head[b] == '\t')) ++b;
  std::size_t t = e;
  while (t > b && (head[t - 1] == ' ' || head[t - 1] == '\t')) --t;
  return head.substr(b, t - b);
}

}  // namespace

constexpr int kSniffTimeoutMs = 250;

std::string websocket_accept_key(const std::string& client_key) {
  const std::string joined = client_key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(joined.data()), joined.size(), digest);
  return base64_encode(std::span<const std::uint8_t>(digest, SHA_DIGEST_LENGTH));
}

ServeResult serve(const SessionInputs& inputs, const ServeOptions& options) {
  Fd listener(::socket(AF_INET, SOCK_STREAM, 0));
  if (listener.get() < 0) throw Error(ErrorCode::BindFailure, std::strerror(errno));
  const int yes = 1;
  ::setsockopt(listener.get(), SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(options.port));
  if (::inet_pton(AF_INET, options.bind_address.c_str(), &addr.sin_addr) != 1) {
    throw Error(ErrorCode::BindFailure, "invalid bind address " + options.bind_address);
  }
  if (::bind(listener.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 ||
      ::listen(listener.get(), 1) < 0) {
    throw Error(ErrorCode::BindFailure,
                "port " + std::to_string(options.port) + ": " + std::strerror(errno));
  }
  socklen_t alen = sizeof addr;
  ::getsockname(listener.get(), reinterpret_cast<sockaddr*>(&addr), &alen);
  if (options.on_listening) options.on_listening(ntohs(addr.sin_port));

  Fd client(::accept(listener.get(), nullptr, nullptr));
  if (client.get() < 0) throw Error(ErrorCode::IoFailure, std::strerror(errno));
  ::setsockopt(client.get(), IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);

  ServeResult result;
  std::string pending;
  char chunk[4096];
  // A WebSocket client speaks first; a TCP client may wait for the hello.
  // No valid length prefix starts with 'G' (it would exceed the frame limit).
  pollfd pfd{client.get(), POLLIN, 0};
  if (::poll(&pfd, 1, kSniffTimeoutMs) > 0) {
    const ssize_t n = ::recv(client.get(), chunk, sizeof chunk, 0);
    if (n <= 0) return result;
    pending.append(chunk, static_cast<std::size_t>(n));
  }

  result.websocket = !pending.empty() && pending[0] == 'G';
  Connection conn(client.get(), result.websocket);
  if (result.websocket) {
    const auto head = read_http_request(client.get(), pending);
    const auto key = head ? header_value(*head, "Sec-WebSocket-Key") : std::nullopt;
    if (!key) {
      send_all(client.get(), "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n");
      result.protocol_error = "websocket upgrade without Sec-WebSocket-Key";
      return result;
    }
    conn.send_raw("HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                  "Sec-WebSocket-Accept: " + websocket_accept_key(*key) + "\r\n\r\n");
  }

  WireSession wire(inputs);
  conn.send_message(wire.handshake());
  std::thread reader([&] { conn.read_loop(std::move(pending)); });

  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(kTickSeconds));
  auto next = clock::now();
  bool stop = false;
  while (!stop) {
    for (auto& in : conn.take()) {
      if (in.protocol_error) {
        conn.send_message(error_message(ErrorCode::ProtocolViolation, in.message));
        result.protocol_error = in.message;
        stop = true;
        break;
      }
      try {
        for (const auto& reply : wire.handle(in.message)) conn.send_message(reply);
      } catch (const Error& e) {
        conn.send_message(error_message(e.code(), e.what()));
        if (e.code() == ErrorCode::ProtocolViolation) {
          result.protocol_error = e.what();
          stop = true;
          break;
        }
      }
    }
    if (stop || conn.closed()) break;
    if (!conn.send_message(wire.tick())) break;
    ++result.ticks;
    if (options.max_ticks >= 0 && result.ticks >= options.max_ticks) break;
    if (options.realtime) {
      next += period;
      std::this_thread::sleep_until(next);
    }
  }

  wire.session().finish();
  conn.shutdown();
  reader.join();

  result.log = wire.session().log();
  result.final_hash = wire.session().state_hash();
  if (options.log_path) {
    std::ofstream out(*options.log_path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + options.log_path->string());
    out << to_jsonl(result.log);
  }
  return result;
}

}  // namespace ivc
