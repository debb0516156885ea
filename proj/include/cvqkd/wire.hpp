#ifndef CVQKD_WIRE_HPP
#define CVQKD_WIRE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cvqkd/core.hpp"

namespace cvqkd {

// Frame layout, normative and bit-exact:
//   magic   "CVQK"            4 bytes
//   version 0x01              1 byte
//   type                      1 byte
//   length  little-endian     4 bytes
//   payload                   length bytes
// Reals inside payloads are 8-byte little-endian IEEE-754 binary64.

inline constexpr std::uint8_t kWireVersion = 0x01;
inline constexpr std::uint32_t kWireHeader = 10;
inline constexpr char kWireMagic[4] = {'C', 'V', 'Q', 'K'};

enum class MessageType : std::uint8_t {
  Hello = 0,
  ConfigAck = 1,
  PulseBatch = 2,
  SyncMark = 3,
  RevealIdx = 4,
  RevealVal = 5,
  ParamEst = 6,
  ParityReq = 7,
  ParityRsp = 8,
  ShuffleSeed = 9,
  VerifyHash = 10,
  PaSeed = 11,
  KeyConfirm = 12,
  Abort = 13,
};

enum class WireError : std::uint8_t {
  None = 0,
  MalformedFrame = 1,  // bad magic, bad length, truncated input
  UnknownType = 2,
  VersionMismatch = 3,
};

struct WireMessage {
  MessageType type = MessageType::Hello;
  std::vector<std::uint8_t> payload;

  bool operator==(const WireMessage&) const = default;
};

struct DecodeResult {
  WireError error = WireError::None;
  WireMessage message;
  std::size_t consumed = 0;  // bytes eaten from the input on success
};

std::vector<std::uint8_t> encode(const WireMessage& msg);
DecodeResult decode(const std::uint8_t* data, std::size_t len);

const char* message_type_name(MessageType t);

// Payload read/write helpers (little-endian).
struct PayloadWriter {
  std::vector<std::uint8_t> bytes;
  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v);
  void raw(const std::uint8_t* p, std::size_t n) { bytes.insert(bytes.end(), p, p + n); }
};

struct PayloadReader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t at = 0;
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::vector<std::uint8_t> raw(std::size_t n);
  bool done() const { return at == bytes.size(); }
};

}  // namespace cvqkd

#endif
