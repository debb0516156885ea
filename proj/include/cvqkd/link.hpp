#ifndef CVQKD_LINK_HPP
#define CVQKD_LINK_HPP

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <vector>

#include "cvqkd/wire.hpp"

namespace cvqkd {

struct LinkClosed : Error {
  using Error::Error;
};

/// Ordered reliable byte stream, one direction. read() blocks until n
/// bytes are available or the writer closed (throws LinkClosed when the
/// stream ends mid-read).
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual void write(const std::uint8_t* data, std::size_t n) = 0;
  virtual void read(std::uint8_t* out, std::size_t n) = 0;
  virtual void close_write() = 0;
};

/// Both directions of a link, as seen from one endpoint.
struct Duplex {
  std::shared_ptr<ByteStream> out;
  std::shared_ptr<ByteStream> in;
};

/// In-process stream backed by a lock-protected deque.
class PipeStream : public ByteStream {
 public:
  void write(const std::uint8_t* data, std::size_t n) override;
  void read(std::uint8_t* out, std::size_t n) override;
  void close_write() override;

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::uint8_t> buf_;
  bool closed_ = false;
};

/// A pair of connected in-process endpoints.
struct PipePair {
  Duplex a;  // endpoint A's view
  Duplex b;  // endpoint B's view
};
PipePair make_pipe_pair();

/// Stream over a connected socket file descriptor; owns the fd.
class SocketStream : public ByteStream {
 public:
  explicit SocketStream(int fd) : fd_(fd) {}
  ~SocketStream() override;
  void write(const std::uint8_t* data, std::size_t n) override;
  void read(std::uint8_t* out, std::size_t n) override;
  void close_write() override;

 private:
  int fd_;
};

/// Connected loopback TCP socket pair (the two-process binding, exercised
/// here within one process).
std::pair<Duplex, Duplex> make_socket_pair();

// ---------------------------------------------------------------------------
// Message IO over a duplex link, with optional transcript recording.

enum class LinkId : std::uint8_t { Classical = 0, Physics = 1 };
enum class Direction : std::uint8_t { Sent = 0, Received = 1 };

struct TranscriptEntry {
  LinkId link;
  Direction dir;
  std::vector<std::uint8_t> frame;  // complete encoded wire frame
};

struct Transcript {
  std::vector<TranscriptEntry> entries;

  std::vector<std::uint8_t> serialize() const;
  static Transcript deserialize(const std::vector<std::uint8_t>& bytes);
  std::string render() const;  // human-readable dump
};

/// Endpoint-side message port: frames WireMessages onto a duplex byte
/// link and logs everything it sends or receives in processing order.
class MessagePort {
 public:
  MessagePort(Duplex link, LinkId id, Transcript* log)
      : link_(std::move(link)), id_(id), log_(log) {}

  void send(const WireMessage& msg);
  WireMessage recv();
  void close() { link_.out->close_write(); }

 private:
  Duplex link_;
  LinkId id_;
  Transcript* log_;
};

}  // namespace cvqkd

#endif
