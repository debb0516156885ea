#ifndef CVQKD_EMITTER_HPP
#define CVQKD_EMITTER_HPP

#include <utility>
#include <vector>

#include "cvqkd/core.hpp"
#include "cvqkd/rng.hpp"

namespace cvqkd {

/// Layout of one frame: a deterministic run of maximal-amplitude test
/// pulses followed by Gaussian-modulated data pulses. The test pattern is
/// fixed and known to both endpoints.
struct FramePlan {
  std::vector<Symbol> test_pattern;
  std::uint32_t data_slots = 0;

  static FramePlan make(const SessionConfig& cfg);

  std::uint32_t frame_len() const {
    return static_cast<std::uint32_t>(test_pattern.size()) + data_slots;
  }
  bool is_test_slot(std::uint32_t slot_in_frame) const {
    return slot_in_frame < test_pattern.size();
  }
};

/// Deterministic test symbol: maximal radius 4*sqrt(V_A), phase cycling
/// through an 8-point constellation {0, 90, 180, 270, 45, 135, 225, 315}
/// degrees so gain, phase and intensity offsets stay separately visible.
Symbol make_test_symbol(std::uint32_t index, double va,
                        std::uint32_t n_test_pulses);

/// One data symbol: 2D Gaussian of per-quadrature variance V_A, redrawn
/// until the radius falls inside 4 standard deviations. The redraw keeps
/// the distribution an exact truncated Gaussian; the resulting
/// per-quadrature variance is V_A*(1-9e^-8)/(1-e^-8).
Symbol draw_symbol(double va, Rng& rng);

/// Alice's source. Keeps the intended symbols as her key record; the
/// emitted pulse means additionally carry the modulator imperfection, and
/// the pulse excess variance carries the phase plus electronic-equivalent
/// budget terms.
class Emitter {
 public:
  Emitter(const SessionConfig& cfg, std::uint64_t seed);

  /// Emits one frame: test pulses first, then data pulses.
  std::vector<std::pair<Symbol, PulseState>> emit_frame();

  /// A pulse outside the frame structure (sync padding): data-modulated,
  /// never part of the key.
  std::pair<Symbol, PulseState> emit_pad_pulse();

  const FramePlan& plan() const { return plan_; }
  double modulator_noise_variance() const { return mod_var_; }
  double source_excess_variance() const { return excess_var_; }

 private:
  PulseState modulate(const Symbol& s, PulseKind kind);

  SessionConfig cfg_;
  FramePlan plan_;
  Rng rng_;
  double mod_var_;     // per-quadrature modulator noise on the means
  double excess_var_;  // phase + electronic-equivalent budget, in excess_var
};

}  // namespace cvqkd

#endif
