#include "cvqkd/channel.hpp"

#include <cmath>

namespace cvqkd {

PulseState transmit(const PulseState& pulse, const ChannelParams& params) {
  params.validate();
  const double amp = std::sqrt(params.gain);
  PulseState out = pulse;
  out.mean_x = amp * pulse.mean_x;
  out.mean_p = amp * pulse.mean_p;
  out.excess_var = params.gain * (pulse.excess_var + params.excess);
  return out;
}

PulseState intercept_resend(const PulseState& pulse, Rng& rng,
                            std::vector<Symbol>* eve_log) {
  const double sd = std::sqrt(2.0 + pulse.excess_var);
  const double xe = pulse.mean_x + sd * rng.gaussian();
  const double pe = pulse.mean_p + sd * rng.gaussian();
  if (eve_log) eve_log->push_back({xe, pe});
  PulseState out;
  out.mean_x = xe;
  out.mean_p = pe;
  out.excess_var = 0.0;  // fresh coherent state; vacuum restored at Bob
  out.kind = pulse.kind;
  return out;
}

ChannelModel::ChannelModel(const SessionConfig& cfg, const AttackModel& attack,
                           std::uint64_t seed)
    : params_(cfg.channel),
      attack_(attack),
      rng_(seed),
      frame_len_(cfg.frame_len),
      drift_step_(cfg.phase_drift) {
  // relative signal/LO phase starts at an arbitrary offset
  phase_ = (2.0 * rng_.uniform() - 1.0) * M_PI;
}

PulseState ChannelModel::propagate(const PulseState& pulse) {
  if (pulse_count_ > 0 && pulse_count_ % frame_len_ == 0 && drift_step_ > 0.0)
    phase_ += drift_step_ * rng_.gaussian();
  ++pulse_count_;

  // the eavesdropper operates at the channel input, so her contribution
  // is loss-scaled exactly like the source noise (input-referred)
  PulseState in = pulse;
  switch (attack_.variant) {
    case AttackVariant::None:
      break;
    case AttackVariant::InjectExcess:
      in.excess_var += attack_.inject_xi;
      break;
    case AttackVariant::InterceptResend:
      if (attack_.fraction >= 1.0 || rng_.uniform() < attack_.fraction)
        in = intercept_resend(in, rng_,
                              attack_.keep_log ? &eve_log_ : nullptr);
      break;
  }

  PulseState out = transmit(in, params_);

  const double c = std::cos(phase_), s = std::sin(phase_);
  const double x = out.mean_x, p = out.mean_p;
  out.mean_x = c * x - s * p;
  out.mean_p = s * x + c * p;
  return out;
}

std::vector<PulseState> ChannelModel::propagate(
    const std::vector<PulseState>& batch) {
  std::vector<PulseState> out;
  out.reserve(batch.size());
  for (const PulseState& p : batch) out.push_back(propagate(p));
  return out;
}

}  // namespace cvqkd
