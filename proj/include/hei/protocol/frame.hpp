#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hei::protocol {

enum class FrameType : std::uint8_t {
  hello = 0x01,
  keys = 0x02,
  infer_req = 0x03,
  infer_resp = 0x04,
  error = 0x7F,
};

bool is_known_type(std::uint8_t t);
std::string to_string(FrameType t);

inline constexpr std::size_t kDefaultFrameCap = 256u << 20;

// Wire form: u32 big-endian payload length | type byte | payload.
struct Frame {
  FrameType type = FrameType::error;
  std::vector<std::uint8_t> payload;

  std::vector<std::uint8_t> encode() const;
  static Frame error_frame(const std::string& message);
  std::string error_message() const;
};

// Blocking file-descriptor socket with optional I/O timeout.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& o) noexcept : fd_(o.release()) {}
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release();
  void close();
  void shutdown_write();
  void set_timeout(std::chrono::milliseconds t);

  void write_all(std::span<const std::uint8_t> bytes);
  // Reads exactly n bytes; returns false on a clean EOF before the first byte.
  bool read_exact(std::span<std::uint8_t> out);

 private:
  int fd_ = -1;
};

Socket connect_to(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);
// Binds and listens; port 0 picks a free port.
Socket listen_on(const std::string& host, std::uint16_t port, int backlog = 16);
std::uint16_t local_port(const Socket& s);

// "host:port" -> parts. A bare port means 127.0.0.1.
std::pair<std::string, std::uint16_t> parse_address(const std::string& address);

void write_frame(Socket& s, const Frame& f);

enum class ReadStatus { ok, eof, truncated, oversized };
struct ReadResult {
  ReadStatus status = ReadStatus::eof;
  Frame frame;
  std::uint8_t raw_type = 0;
  std::uint64_t declared_length = 0;
};
// Reads one frame. A peer closing mid-frame gives status truncated; an
// expired I/O timeout throws TimeoutError. Unknown types are returned with
// status ok and raw_type set; callers decide how to reject them.
ReadResult read_frame(Socket& s, std::size_t cap = kDefaultFrameCap);

// Big-endian helpers for frame payloads.
void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v);
std::uint32_t get_u32_be(std::span<const std::uint8_t> in, std::size_t offset);
void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v);
std::uint32_t get_u32_le(std::span<const std::uint8_t> in, std::size_t offset);

}  // namespace hei::protocol
