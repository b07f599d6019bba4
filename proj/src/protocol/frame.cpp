#include "hei/protocol/frame.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "hei/errors.hpp"

namespace hei::protocol {

bool is_known_type(std::uint8_t t) { return (t >= 0x01 && t <= 0x04) || t == 0x7F; }

std::string to_string(FrameType t) {
  switch (t) {
    case FrameType::hello: return "HELLO_PARAMS";
    case FrameType::keys: return "KEYS";
    case FrameType::infer_req: return "INFER_REQ";
    case FrameType::infer_resp: return "INFER_RESP";
    case FrameType::error: return "ERROR";
  }
  return "UNKNOWN";
}

std::vector<std::uint8_t> Frame::encode() const {
  if (payload.size() > 0xFFFFFFFFull) throw ProtocolError("frame payload too large");
  std::vector<std::uint8_t> out;
  out.reserve(5 + payload.size());
  put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  out.push_back(static_cast<std::uint8_t>(type));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Frame Frame::error_frame(const std::string& message) {
  return {FrameType::error, std::vector<std::uint8_t>(message.begin(), message.end())};
}

std::string Frame::error_message() const { return {payload.begin(), payload.end()}; }

Socket::~Socket() { close(); }

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.release();
  }
  return *this;
}

int Socket::release() {
  const int fd = fd_;
  fd_ = -1;
  return fd;
}

void Socket::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Socket::shutdown_write() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
}

void Socket::set_timeout(std::chrono::milliseconds t) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(t.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((t.count() % 1000) * 1000);
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

void Socket::write_all(std::span<const std::uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw TimeoutError("transport timeout while sending");
      throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

bool Socket::read_exact(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    const ssize_t n = ::recv(fd_, out.data() + done, out.size() - done, 0);
    if (n == 0) {
      if (done == 0) return false;
      throw ProtocolError("connection closed mid-frame");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw TimeoutError("transport timeout while receiving");
      throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

namespace {

addrinfo* resolve(const std::string& host, std::uint16_t port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res);
  if (rc != 0) throw ProtocolError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  return res;
}

}  // namespace

Socket connect_to(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
  addrinfo* res = resolve(host, port, false);
  std::string last = "no address";
  for (addrinfo* a = res; a; a = a->ai_next) {
    Socket s(::socket(a->ai_family, a->ai_socktype, a->ai_protocol));
    if (!s.valid()) continue;
    s.set_timeout(timeout);
    if (::connect(s.fd(), a->ai_addr, a->ai_addrlen) == 0) {
      const int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      ::freeaddrinfo(res);
      return s;
    }
    last = std::strerror(errno);
  }
  ::freeaddrinfo(res);
  throw ProtocolError("cannot connect to " + host + ":" + std::to_string(port) + ": " + last);
}

Socket listen_on(const std::string& host, std::uint16_t port, int backlog) {
  addrinfo* res = resolve(host, port, true);
  std::string last = "no address";
  for (addrinfo* a = res; a; a = a->ai_next) {
    Socket s(::socket(a->ai_family, a->ai_socktype, a->ai_protocol));
    if (!s.valid()) continue;
    const int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.fd(), a->ai_addr, a->ai_addrlen) == 0 && ::listen(s.fd(), backlog) == 0) {
      ::freeaddrinfo(res);
      return s;
    }
    last = std::strerror(errno);
  }
  ::freeaddrinfo(res);
  throw ProtocolError("cannot listen on " + host + ":" + std::to_string(port) + ": " + last);
}

std::uint16_t local_port(const Socket& s) {
  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) throw ProtocolError("getsockname failed");
  if (addr.ss_family == AF_INET) return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
}

std::pair<std::string, std::uint16_t> parse_address(const std::string& address) {
  const auto colon = address.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : address.substr(0, colon);
  const std::string port = colon == std::string::npos ? address : address.substr(colon + 1);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  if (host.empty()) host = "0.0.0.0";
  try {
    const unsigned long p = std::stoul(port);
    if (p > 65535) throw ProtocolError("port out of range in '" + address + "'");
    return {host, static_cast<std::uint16_t>(p)};
  } catch (const std::logic_error&) {
    throw ProtocolError("malformed address '" + address + "' (expected host:port)");
  }
}

void write_frame(Socket& s, const Frame& f) {
  std::vector<std::uint8_t> header;
  put_u32_be(header, static_cast<std::uint32_t>(f.payload.size()));
  header.push_back(static_cast<std::uint8_t>(f.type));
  s.write_all(header);
  s.write_all(f.payload);
}

ReadResult read_frame(Socket& s, std::size_t cap) {
  ReadResult r;
  std::uint8_t header[5];
  try {
    if (!s.read_exact(header)) return r;
  } catch (const TimeoutError&) {
    throw;
  } catch (const ProtocolError&) {
    r.status = ReadStatus::truncated;
    return r;
  }
  r.declared_length = get_u32_be(header, 0);
  r.raw_type = header[4];
  if (r.declared_length > cap) {
    r.status = ReadStatus::oversized;
    return r;
  }
  r.frame.payload.resize(r.declared_length);
  try {
    if (r.declared_length && !s.read_exact(r.frame.payload)) {
      r.status = ReadStatus::truncated;
      return r;
    }
  } catch (const TimeoutError&) {
    throw;
  } catch (const ProtocolError&) {
    r.status = ReadStatus::truncated;
    return r;
  }
  r.frame.type = static_cast<FrameType>(r.raw_type);
  r.status = ReadStatus::ok;
  return r;
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 3; b >= 0; --b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32_be(std::span<const std::uint8_t> in, std::size_t offset) {
  if (in.size() < offset + 4) throw ProtocolError("payload truncated");
  std::uint32_t v = 0;
  for (std::size_t b = 0; b < 4; ++b) v = (v << 8) | in[offset + b];
  return v;
}

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32_le(std::span<const std::uint8_t> in, std::size_t offset) {
  if (in.size() < offset + 4) throw ProtocolError("payload truncated");
  std::uint32_t v = 0;
  for (std::size_t b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[offset + b]) << (8 * b);
  return v;
}

}  // namespace hei::protocol
