#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>

#include "timecheck/sources.hpp"
#include "timecheck/timebase.hpp"

namespace timecheck {

/// Seconds between 1900-01-01 (NTP era 0) and 1970-01-01.
inline constexpr std::int64_t kNtpUnixEpochDelta = 2'208'988'800;
inline constexpr std::size_t kNtpPacketSize = 48;
inline constexpr std::uint16_t kNtpPort = 123;

/// 64-bit NTP timestamp: seconds since 1900 and a 2^-32 s fraction.
struct NtpTimestamp {
  std::uint32_t seconds = 0;
  std::uint32_t fraction = 0;

  bool operator==(const NtpTimestamp&) const = default;
};

// TODO: era handling for timestamps past the 2036 seconds-field rollover.
NtpTimestamp to_ntp_timestamp(Instant unix_time);
Instant from_ntp_timestamp(NtpTimestamp ts);

enum class NtpMode : std::uint8_t { kClient = 3, kServer = 4 };

/// The fields of a 48-byte NTP header this client reads or writes.
struct NtpPacket {
  std::uint8_t leap = 0;
  std::uint8_t version = 4;
  std::uint8_t mode = 3;
  std::uint8_t stratum = 0;
  NtpTimestamp reference;
  NtpTimestamp origin;
  NtpTimestamp receive;
  NtpTimestamp transmit;
};

std::array<std::uint8_t, kNtpPacketSize> encode_packet(const NtpPacket& p);
/// Throws SntpError(kMalformedReply) when fewer than 48 bytes are given.
NtpPacket decode_packet(std::span<const std::uint8_t> bytes);

class SntpError : public std::runtime_error {
 public:
  enum class Kind { kTimeout, kMalformedReply, kRateLimited, kNetwork };
  SntpError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Minimal SNTP (mode 3/4) client over UDP.
///
/// Each server may be queried at most once per min_poll interval; an early
/// query is refused locally without sending anything. The wall clock used
/// for t0/t3 is injectable for tests and defaults to the system clock on
/// the Unix epoch.
class SntpClient {
 public:
  using WallClock = std::function<Instant()>;

  explicit SntpClient(Duration min_poll = Duration::seconds(16), WallClock clock = {});

  /// One four-timestamp exchange with `server` ("host", "host:port" or
  /// "[v6addr]:port"; port defaults to 123). t1/t2 come from the server,
  /// t0/t3 from the wall clock. Throws SntpError.
  NtpExchange query(const std::string& server, Duration timeout);

  Duration min_poll() const { return min_poll_; }

 private:
  Duration min_poll_;
  WallClock clock_;
  std::map<std::string, std::chrono::steady_clock::time_point> last_query_;
};

}  // namespace timecheck
