#ifndef CVQKD_CHANNEL_HPP
#define CVQKD_CHANNEL_HPP

#include <optional>
#include <vector>

#include "cvqkd/core.hpp"
#include "cvqkd/rng.hpp"

namespace cvqkd {

enum class AttackVariant : std::uint8_t {
  None = 0,
  InjectExcess = 1,
  InterceptResend = 2,
};

struct AttackModel {
  AttackVariant variant = AttackVariant::None;
  double inject_xi = 0.0;  // extra input-referred excess for InjectExcess
  double fraction = 1.0;   // InterceptResend: fraction of pulses attacked
  bool keep_log = false;   // record Eve's measured values
};

/// Pure loss/noise map: means scale by sqrt(G), accumulated excess scales
/// by G, and the channel's own input-referred excess joins before the
/// scaling. Vacuum is not touched here; the receiver adds it once.
PulseState transmit(const PulseState& pulse, const ChannelParams& params);

/// Simultaneous measurement of both quadratures followed by coherent
/// re-preparation. The measurement noise (one vacuum unit plus one
/// splitting unit plus whatever excess the pulse carried) lands in the
/// resent mean; the fresh pulse carries no excess of its own, so the
/// channel picks up exactly two shot-noise units referred to its input.
PulseState intercept_resend(const PulseState& pulse, Rng& rng,
                            std::vector<Symbol>* eve_log = nullptr);

/// The fiber between the endpoints, with the eavesdropper's interposer
/// and the slow signal/local-oscillator phase drift. Applies, in order:
/// session excess + loss, attack, phase rotation. One instance per
/// session; processes pulses strictly in emission order.
class ChannelModel {
 public:
  ChannelModel(const SessionConfig& cfg, const AttackModel& attack,
               std::uint64_t seed);

  PulseState propagate(const PulseState& pulse);
  std::vector<PulseState> propagate(const std::vector<PulseState>& batch);

  const std::vector<Symbol>& eve_log() const { return eve_log_; }
  double current_phase() const { return phase_; }

 private:
  ChannelParams params_;
  AttackModel attack_;
  Rng rng_;
  std::uint32_t frame_len_;
  double drift_step_;
  double phase_;
  std::uint64_t pulse_count_ = 0;
  std::vector<Symbol> eve_log_;
};

}  // namespace cvqkd

#endif
