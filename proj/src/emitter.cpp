#include "cvqkd/emitter.hpp"

#include <cmath>

namespace cvqkd {

namespace {

// 8-point constellation, degrees
constexpr double kTestPhases[8] = {0, 90, 180, 270, 45, 135, 225, 315};

// Published pattern: a fixed head, then a scrambled tail chosen so the
// cyclic autocorrelation stays below 0.21 of the main peak for both the
// full 20-entry pattern and its 10-entry truncation. A plain repetition
// of the 8-cycle would alias at shifts of 8 pulses, and a consecutive
// run is coherent at shift 1 (every step advances the phase by 90
// degrees), which would blind the synchronizer's peak-ratio test.
constexpr std::uint32_t kPatternIndex[20] = {0, 1, 2, 3, 4, 7, 1, 0, 0, 6,
                                             2, 2, 7, 0, 0, 6, 0, 3, 3, 4};

}  // namespace

Symbol make_test_symbol(std::uint32_t index, double va,
                        std::uint32_t n_test_pulses) {
  if (index >= n_test_pulses)
    throw InvalidArgument("test symbol index out of range");
  if (!(va > 0.0)) throw InvalidArgument("va must be > 0");
  const double radius = 4.0 * std::sqrt(va);
  // beyond the published 20 entries the pattern continues with a rotated
  // repeat, keeping determinism for non-default frame layouts
  const std::uint32_t k = kPatternIndex[index % 20] + 5 * (index / 20);
  const double phi = kTestPhases[k % 8] * M_PI / 180.0;
  return {radius * std::cos(phi), radius * std::sin(phi)};
}

FramePlan FramePlan::make(const SessionConfig& cfg) {
  FramePlan plan;
  plan.test_pattern.reserve(cfg.test_pulses_per_frame);
  for (std::uint32_t i = 0; i < cfg.test_pulses_per_frame; ++i)
    plan.test_pattern.push_back(
        make_test_symbol(i, cfg.modulation_variance, cfg.test_pulses_per_frame));
  plan.data_slots = cfg.frame_len - cfg.test_pulses_per_frame;
  return plan;
}

Symbol draw_symbol(double va, Rng& rng) {
  if (!(va > 0.0)) throw InvalidArgument("va must be > 0");
  const double sd = std::sqrt(va);
  const double r2_max = 16.0 * va;
  for (;;) {
    const double x = sd * rng.gaussian();
    const double p = sd * rng.gaussian();
    if (x * x + p * p <= r2_max) return {x, p};
  }
}

Emitter::Emitter(const SessionConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), plan_(FramePlan::make(cfg)), rng_(seed) {
  const double scale = cfg.modulation_variance / kReferenceVa;
  mod_var_ = cfg.budget_modulation * scale;
  excess_var_ = (cfg.budget_phase + cfg.budget_electronic) * scale;
}

PulseState Emitter::modulate(const Symbol& s, PulseKind kind) {
  PulseState pulse;
  const double sd = std::sqrt(mod_var_);
  pulse.mean_x = s.x + (sd > 0.0 ? sd * rng_.gaussian() : 0.0);
  pulse.mean_p = s.p + (sd > 0.0 ? sd * rng_.gaussian() : 0.0);
  pulse.excess_var = excess_var_;
  pulse.kind = kind;
  return pulse;
}

std::vector<std::pair<Symbol, PulseState>> Emitter::emit_frame() {
  std::vector<std::pair<Symbol, PulseState>> frame;
  frame.reserve(plan_.frame_len());
  for (const Symbol& t : plan_.test_pattern)
    frame.emplace_back(t, modulate(t, PulseKind::Test));
  for (std::uint32_t i = 0; i < plan_.data_slots; ++i) {
    const Symbol s = draw_symbol(cfg_.modulation_variance, rng_);
    frame.emplace_back(s, modulate(s, PulseKind::Data));
  }
  return frame;
}

std::pair<Symbol, PulseState> Emitter::emit_pad_pulse() {
  const Symbol s = draw_symbol(cfg_.modulation_variance, rng_);
  return {s, modulate(s, PulseKind::Data)};
}

}  // namespace cvqkd
