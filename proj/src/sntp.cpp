#include "timecheck/sntp.hpp"

#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <memory>
#include <optional>
#include <utility>

namespace timecheck {

namespace {

constexpr std::int64_t kNanosPerSecond = 1'000'000'000;

void put_u32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 24);
  p[1] = static_cast<std::uint8_t>(v >> 16);
  p[2] = static_cast<std::uint8_t>(v >> 8);
  p[3] = static_cast<std::uint8_t>(v);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void put_ts(std::uint8_t* p, NtpTimestamp ts) {
  put_u32(p, ts.seconds);
  put_u32(p + 4, ts.fraction);
}

NtpTimestamp get_ts(const std::uint8_t* p) { return {get_u32(p), get_u32(p + 4)}; }

Instant system_now() {
  auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
      std::chrono::system_clock::now().time_since_epoch());
  return Instant(ns.count());
}

class Socket {
 public:
  explicit Socket(int fd) : fd_(fd) {}
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() {
    if (fd_ >= 0) ::close(fd_);
  }
  int get() const { return fd_; }

 private:
  int fd_;
};

std::pair<std::string, std::string> split_host_port(const std::string& server) {
  if (!server.empty() && server.front() == '[') {
    auto close = server.find(']');
    if (close == std::string::npos) {
      throw SntpError(SntpError::Kind::kNetwork, "bad server address '" + server + "'");
    }
    std::string host = server.substr(1, close - 1);
    if (close + 1 < server.size() && server[close + 1] == ':') {
      return {host, server.substr(close + 2)};
    }
    return {host, std::to_string(kNtpPort)};
  }
  auto colon = server.rfind(':');
  if (colon != std::string::npos && server.find(':') == colon) {
    return {server.substr(0, colon), server.substr(colon + 1)};
  }
  return {server, std::to_string(kNtpPort)};
}

bool same_endpoint(const sockaddr_storage& a, socklen_t alen, const sockaddr* b, socklen_t blen) {
  return alen == blen && std::memcmp(&a, b, alen) == 0;
}

}  // namespace

NtpTimestamp to_ntp_timestamp(Instant unix_time) {
  std::int64_t ns = unix_time.nanos();
  std::int64_t secs = ns / kNanosPerSecond;
  std::int64_t rem = ns % kNanosPerSecond;
  if (rem < 0) {
    rem += kNanosPerSecond;
    --secs;
  }
  auto frac = static_cast<std::uint64_t>(((static_cast<unsigned __int128>(rem) << 32) +
                                          kNanosPerSecond / 2) /
                                         kNanosPerSecond);
  if (frac > 0xFFFFFFFFu) {
    frac = 0;
    ++secs;
  }
  return {static_cast<std::uint32_t>(secs + kNtpUnixEpochDelta),
          static_cast<std::uint32_t>(frac)};
}

Instant from_ntp_timestamp(NtpTimestamp ts) {
  std::int64_t secs = static_cast<std::int64_t>(ts.seconds) - kNtpUnixEpochDelta;
  auto frac_ns = static_cast<std::int64_t>(
      (static_cast<unsigned __int128>(ts.fraction) * kNanosPerSecond + (1ull << 31)) >> 32);
  return Instant(secs * kNanosPerSecond + frac_ns);
}

std::array<std::uint8_t, kNtpPacketSize> encode_packet(const NtpPacket& p) {
  std::array<std::uint8_t, kNtpPacketSize> b{};
  b[0] = static_cast<std::uint8_t>(((p.leap & 0x3) << 6) | ((p.version & 0x7) << 3) | (p.mode & 0x7));
  b[1] = p.stratum;
  put_ts(&b[16], p.reference);
  put_ts(&b[24], p.origin);
  put_ts(&b[32], p.receive);
  put_ts(&b[40], p.transmit);
  return b;
}

NtpPacket decode_packet(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kNtpPacketSize) {
    throw SntpError(SntpError::Kind::kMalformedReply,
                    "short NTP packet: " + std::to_string(bytes.size()) + " bytes");
  }
  NtpPacket p;
  p.leap = bytes[0] >> 6;
  p.version = (bytes[0] >> 3) & 0x7;
  p.mode = bytes[0] & 0x7;
  p.stratum = bytes[1];
  p.reference = get_ts(&bytes[16]);
  p.origin = get_ts(&bytes[24]);
  p.receive = get_ts(&bytes[32]);
  p.transmit = get_ts(&bytes[40]);
  return p;
}

SntpClient::SntpClient(Duration min_poll, WallClock clock)
    : min_poll_(min_poll), clock_(clock ? std::move(clock) : WallClock(system_now)) {}

NtpExchange SntpClient::query(const std::string& server, Duration timeout) {
  using Kind = SntpError::Kind;
  const auto steady_now = std::chrono::steady_clock::now();
  if (auto it = last_query_.find(server); it != last_query_.end()) {
    auto since = std::chrono::duration_cast<std::chrono::nanoseconds>(steady_now - it->second);
    if (since.count() < min_poll_.nanos()) {
      throw SntpError(Kind::kRateLimited, "query to " + server + " refused: inside min-poll interval");
    }
  }

  auto [host, port] = split_host_port(server);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw SntpError(Kind::kNetwork, "resolve " + server + ": " + ::gai_strerror(rc));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, ::freeaddrinfo);

  Socket sock(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
  if (sock.get() < 0) throw SntpError(Kind::kNetwork, std::string("socket: ") + std::strerror(errno));

  last_query_[server] = steady_now;

  NtpPacket request;
  request.mode = static_cast<std::uint8_t>(NtpMode::kClient);
  const Instant t0 = clock_();
  request.transmit = to_ntp_timestamp(t0);
  auto wire = encode_packet(request);
  if (::sendto(sock.get(), wire.data(), wire.size(), 0, res->ai_addr, res->ai_addrlen) < 0) {
    throw SntpError(Kind::kNetwork, "sendto " + server + ": " + std::strerror(errno));
  }

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::nanoseconds(timeout.nanos());
  std::array<std::uint8_t, 512> buf{};
  while (true) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw SntpError(Kind::kTimeout, "no reply from " + server);
    pollfd pfd{sock.get(), POLLIN, 0};
    int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw SntpError(Kind::kNetwork, std::string("poll: ") + std::strerror(errno));
    }
    if (ready == 0) throw SntpError(Kind::kTimeout, "no reply from " + server);

    sockaddr_storage from{};
    socklen_t from_len = sizeof(from);
    ssize_t n = ::recvfrom(sock.get(), buf.data(), buf.size(), 0,
                           reinterpret_cast<sockaddr*>(&from), &from_len);
    const Instant t3 = clock_();
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw SntpError(Kind::kNetwork, std::string("recvfrom: ") + std::strerror(errno));
    }
    // Stray datagrams from other peers are ignored.
    if (!same_endpoint(from, from_len, res->ai_addr, res->ai_addrlen)) continue;

    NtpPacket reply = decode_packet(std::span(buf.data(), static_cast<std::size_t>(n)));
    if (reply.origin != request.transmit) continue;  // stale or spoofed reply
    if (reply.mode != static_cast<std::uint8_t>(NtpMode::kServer)) {
      throw SntpError(Kind::kMalformedReply, "reply mode " + std::to_string(reply.mode));
    }
    if (reply.stratum == 0) throw SntpError(Kind::kMalformedReply, "kiss-o'-death reply");
    if (reply.leap == 3) throw SntpError(Kind::kMalformedReply, "server clock unsynchronized");
    if (reply.transmit == NtpTimestamp{}) {
      throw SntpError(Kind::kMalformedReply, "zero transmit timestamp");
    }
    NtpExchange x{server, t0, from_ntp_timestamp(reply.receive), from_ntp_timestamp(reply.transmit),
                  t3};
    if (x.t2 < x.t1) throw SntpError(Kind::kMalformedReply, "server transmit precedes receive");
    return x;
  }
}

}  // namespace timecheck
