#ifndef CVQKD_FRAMING_HPP
#define CVQKD_FRAMING_HPP

#include <span>
#include <vector>

#include "cvqkd/core.hpp"
#include "cvqkd/emitter.hpp"
#include "cvqkd/receiver.hpp"

namespace cvqkd {

struct SyncError : Error {
  using Error::Error;
};
struct PhaseError : Error {
  using Error::Error;
};

/// Cyclic offset (in pulses) of the frame structure within a measurement
/// stream, found by correlating against the known test pattern. Needs at
/// least two frames of measurements. Correlation is taken in absolute
/// value, so a global sign flip of the stream does not move the peak; the
/// residual pi ambiguity is resolved by recover_phase. Throws SyncError
/// when the best peak does not dominate the runner-up by the threshold
/// factor (default 2, i.e. 3 dB).
std::uint32_t detect_offset(std::span<const Measurement> measurements,
                            const FramePlan& plan,
                            double peak_ratio_threshold = 2.0);

/// Relative signal/local-oscillator phase over a block, estimated by a
/// least-squares fit of the rotated test pattern to the test-slot
/// measurements, averaged over every test pulse supplied. Returns a value
/// in (-pi, pi]. Throws PhaseError on degenerate input.
double recover_phase(std::span<const Measurement> test_measurements,
                     std::span<const Symbol> test_symbols);

struct DemuxedBlock {
  std::vector<Measurement> test;        // block-ordered test-slot data
  std::vector<Symbol> test_symbols;     // matching pattern entries
  std::vector<Measurement> data;        // block-ordered data-slot data
  std::vector<std::uint32_t> data_slot; // absolute in-block pulse index
};

/// Splits an offset-aligned block into test and data streams according to
/// the frame plan. `measurements` must hold exactly block_len entries
/// starting at the detected offset.
DemuxedBlock demux_block(std::span<const Measurement> measurements,
                         const FramePlan& plan);

/// Rotates a symbol by theta (the correction Alice applies to her record
/// once Bob reports the recovered phase).
inline Symbol rotate_symbol(const Symbol& s, double theta) {
  const double c = std::cos(theta), sn = std::sin(theta);
  return {c * s.x - sn * s.p, sn * s.x + c * s.p};
}

}  // namespace cvqkd

#endif
