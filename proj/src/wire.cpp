#include "cvqkd/wire.hpp"

#include <cstring>

namespace cvqkd {

void PayloadWriter::f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  u64(bits);
}

std::uint8_t PayloadReader::u8() {
  if (at + 1 > bytes.size()) throw Error("payload: truncated");
  return bytes[at++];
}
std::uint32_t PayloadReader::u32() {
  if (at + 4 > bytes.size()) throw Error("payload: truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at++]) << (8 * i);
  return v;
}
std::uint64_t PayloadReader::u64() {
  if (at + 8 > bytes.size()) throw Error("payload: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[at++]) << (8 * i);
  return v;
}
double PayloadReader::f64() {
  const std::uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}
std::vector<std::uint8_t> PayloadReader::raw(std::size_t n) {
  if (at + n > bytes.size()) throw Error("payload: truncated");
  std::vector<std::uint8_t> out(bytes.begin() + at, bytes.begin() + at + n);
  at += n;
  return out;
}

std::vector<std::uint8_t> encode(const WireMessage& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(kWireHeader + msg.payload.size());
  out.insert(out.end(), kWireMagic, kWireMagic + 4);
  out.push_back(kWireVersion);
  out.push_back(static_cast<std::uint8_t>(msg.type));
  const auto len = static_cast<std::uint32_t>(msg.payload.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

DecodeResult decode(const std::uint8_t* data, std::size_t len) {
  DecodeResult r;
  if (len < kWireHeader) {
    r.error = WireError::MalformedFrame;
    return r;
  }
  if (std::memcmp(data, kWireMagic, 4) != 0) {
    r.error = WireError::MalformedFrame;
    return r;
  }
  if (data[4] != kWireVersion) {
    r.error = WireError::VersionMismatch;
    return r;
  }
  const std::uint8_t type = data[5];
  if (type > static_cast<std::uint8_t>(MessageType::Abort)) {
    r.error = WireError::UnknownType;
    return r;
  }
  std::uint32_t plen = 0;
  for (int i = 0; i < 4; ++i) plen |= static_cast<std::uint32_t>(data[6 + i]) << (8 * i);
  if (len < kWireHeader + static_cast<std::size_t>(plen)) {
    r.error = WireError::MalformedFrame;
    return r;
  }
  r.message.type = static_cast<MessageType>(type);
  r.message.payload.assign(data + kWireHeader, data + kWireHeader + plen);
  r.consumed = kWireHeader + plen;
  return r;
}

const char* message_type_name(MessageType t) {
  switch (t) {
    case MessageType::Hello: return "HELLO";
    case MessageType::ConfigAck: return "CONFIG_ACK";
    case MessageType::PulseBatch: return "PULSE_BATCH";
    case MessageType::SyncMark: return "SYNC_MARK";
    case MessageType::RevealIdx: return "REVEAL_IDX";
    case MessageType::RevealVal: return "REVEAL_VAL";
    case MessageType::ParamEst: return "PARAM_EST";
    case MessageType::ParityReq: return "PARITY_REQ";
    case MessageType::ParityRsp: return "PARITY_RSP";
    case MessageType::ShuffleSeed: return "SHUFFLE_SEED";
    case MessageType::VerifyHash: return "VERIFY_HASH";
    case MessageType::PaSeed: return "PA_SEED";
    case MessageType::KeyConfirm: return "KEY_CONFIRM";
    case MessageType::Abort: return "ABORT";
  }
  return "?";
}

}  // namespace cvqkd
