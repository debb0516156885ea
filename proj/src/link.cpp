#include "cvqkd/link.hpp"

#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <sstream>

namespace cvqkd {

void PipeStream::write(const std::uint8_t* data, std::size_t n) {
  {
    std::lock_guard lk(mu_);
    if (closed_) throw LinkClosed("pipe: write after close");
    buf_.insert(buf_.end(), data, data + n);
  }
  cv_.notify_all();
}

void PipeStream::read(std::uint8_t* out, std::size_t n) {
  std::unique_lock lk(mu_);
  std::size_t got = 0;
  while (got < n) {
    cv_.wait(lk, [&] { return !buf_.empty() || closed_; });
    if (buf_.empty() && closed_) throw LinkClosed("pipe: stream ended");
    while (got < n && !buf_.empty()) {
      out[got++] = buf_.front();
      buf_.pop_front();
    }
  }
}

void PipeStream::close_write() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

PipePair make_pipe_pair() {
  auto ab = std::make_shared<PipeStream>();
  auto ba = std::make_shared<PipeStream>();
  PipePair p;
  p.a = {ab, ba};
  p.b = {ba, ab};
  return p;
}

SocketStream::~SocketStream() {
  if (fd_ >= 0) ::close(fd_);
}

void SocketStream::write(const std::uint8_t* data, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    const ssize_t k = ::send(fd_, data + sent, n - sent, MSG_NOSIGNAL);
    if (k <= 0) throw LinkClosed("socket: send failed");
    sent += static_cast<std::size_t>(k);
  }
}

void SocketStream::read(std::uint8_t* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t k = ::recv(fd_, out + got, n - got, 0);
    if (k <= 0) throw LinkClosed("socket: stream ended");
    got += static_cast<std::size_t>(k);
  }
}

void SocketStream::close_write() { ::shutdown(fd_, SHUT_WR); }

std::pair<Duplex, Duplex> make_socket_pair() {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw Error("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listener, 1) != 0) {
    ::close(listener);
    throw Error("bind/listen failed");
  }
  socklen_t alen = sizeof(addr);
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &alen);

  const int client = ::socket(AF_INET, SOCK_STREAM, 0);
  if (client < 0 ||
      ::connect(client, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(listener);
    if (client >= 0) ::close(client);
    throw Error("connect failed");
  }
  const int server = ::accept(listener, nullptr, nullptr);
  ::close(listener);
  if (server < 0) {
    ::close(client);
    throw Error("accept failed");
  }
  const int one = 1;
  ::setsockopt(client, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  ::setsockopt(server, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

  auto cs = std::make_shared<SocketStream>(client);
  auto ss = std::make_shared<SocketStream>(server);
  return {Duplex{cs, cs}, Duplex{ss, ss}};
}

std::vector<std::uint8_t> Transcript::serialize() const {
  std::vector<std::uint8_t> out = {'C', 'V', 'Q', 'T'};
  for (const TranscriptEntry& e : entries) {
    out.push_back(static_cast<std::uint8_t>(e.link));
    out.push_back(static_cast<std::uint8_t>(e.dir));
    const auto len = static_cast<std::uint32_t>(e.frame.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
    out.insert(out.end(), e.frame.begin(), e.frame.end());
  }
  return out;
}

Transcript Transcript::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "CVQT", 4) != 0)
    throw Error("transcript: bad magic");
  Transcript t;
  std::size_t at = 4;
  while (at < bytes.size()) {
    if (at + 6 > bytes.size()) throw Error("transcript: truncated entry");
    TranscriptEntry e;
    e.link = static_cast<LinkId>(bytes[at++]);
    e.dir = static_cast<Direction>(bytes[at++]);
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(bytes[at++]) << (8 * i);
    if (at + len > bytes.size()) throw Error("transcript: truncated frame");
    e.frame.assign(bytes.begin() + at, bytes.begin() + at + len);
    at += len;
    t.entries.push_back(std::move(e));
  }
  return t;
}

std::string Transcript::render() const {
  std::ostringstream out;
  std::size_t idx = 0;
  for (const TranscriptEntry& e : entries) {
    out << idx++ << ' ' << (e.link == LinkId::Classical ? "classical" : "physics")
        << ' ' << (e.dir == Direction::Sent ? "->" : "<-") << ' ';
    const DecodeResult d = decode(e.frame.data(), e.frame.size());
    if (d.error != WireError::None) {
      out << "(undecodable, " << e.frame.size() << " bytes)\n";
      continue;
    }
    out << message_type_name(d.message.type) << " len=" << d.message.payload.size()
        << '\n';
  }
  return out.str();
}

void MessagePort::send(const WireMessage& msg) {
  const std::vector<std::uint8_t> frame = encode(msg);
  if (log_) log_->entries.push_back({id_, Direction::Sent, frame});
  link_.out->write(frame.data(), frame.size());
}

WireMessage MessagePort::recv() {
  std::uint8_t header[kWireHeader];
  link_.in->read(header, kWireHeader);
  const DecodeResult head = [&] {
    DecodeResult r;
    if (std::memcmp(header, kWireMagic, 4) != 0) {
      r.error = WireError::MalformedFrame;
      return r;
    }
    if (header[4] != kWireVersion) {
      r.error = WireError::VersionMismatch;
      return r;
    }
    if (header[5] > static_cast<std::uint8_t>(MessageType::Abort)) {
      r.error = WireError::UnknownType;
      return r;
    }
    return r;
  }();
  if (head.error == WireError::MalformedFrame) throw Error("link: malformed frame");
  if (head.error == WireError::VersionMismatch) throw Error("link: version mismatch");
  if (head.error == WireError::UnknownType) throw Error("link: unknown message type");

  std::uint32_t plen = 0;
  for (int i = 0; i < 4; ++i) plen |= static_cast<std::uint32_t>(header[6 + i]) << (8 * i);
  WireMessage msg;
  msg.type = static_cast<MessageType>(header[5]);
  msg.payload.resize(plen);
  if (plen) link_.in->read(msg.payload.data(), plen);
  if (log_) {
    std::vector<std::uint8_t> frame(header, header + kWireHeader);
    frame.insert(frame.end(), msg.payload.begin(), msg.payload.end());
    log_->entries.push_back({id_, Direction::Received, std::move(frame)});
  }
  return msg;
}

}  // namespace cvqkd
