#ifndef CVQKD_TEST_HELPERS_HPP
#define CVQKD_TEST_HELPERS_HPP

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "cvqkd/channel.hpp"
#include "cvqkd/core.hpp"
#include "cvqkd/emitter.hpp"
#include "cvqkd/estimation.hpp"
#include "cvqkd/framing.hpp"
#include "cvqkd/receiver.hpp"
#include "cvqkd/rng.hpp"

namespace cvqkd::test {

inline double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(std::span<const double> v) {
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size());
}

/// Fast in-process block simulation: emit -> channel -> measure, no
/// transport framing. Returns everything the estimation and
/// reconciliation tests need.
struct SimulatedBlock {
  std::vector<Symbol> symbols;          // intended, block-aligned
  std::vector<Measurement> measurements;
  std::vector<EstimationPair> data_pairs;  // phase-corrected data pulses
  std::vector<EstimationPair> test_pairs;
  double theta_hat = 0.0;
};

inline SimulatedBlock simulate_block(const SessionConfig& cfg,
                                     const AttackModel& attack,
                                     std::uint64_t seed,
                                     bool correct_phase = true) {
  SimulatedBlock out;
  Emitter emitter(cfg, derive_seed(seed, 1));
  ChannelModel channel(cfg, attack, derive_seed(seed, 3));
  Receiver receiver(cfg.detector, derive_seed(seed, 2));
  std::uint64_t idx = 0;
  for (std::uint32_t f = 0; f < cfg.frames_per_block(); ++f) {
    for (auto& [sym, pulse] : emitter.emit_frame()) {
      out.symbols.push_back(sym);
      out.measurements.push_back(receiver.measure(channel.propagate(pulse), idx++));
    }
  }
  if (correct_phase) {
    std::vector<Measurement> tm;
    std::vector<Symbol> ts;
    for (std::size_t i = 0; i < out.measurements.size(); ++i) {
      if (i % cfg.frame_len < cfg.test_pulses_per_frame) {
        tm.push_back(out.measurements[i]);
        ts.push_back(out.symbols[i]);
      }
    }
    out.theta_hat = recover_phase(tm, ts);
  }
  for (std::size_t i = 0; i < out.measurements.size(); ++i) {
    const Symbol r = rotate_symbol(out.symbols[i], out.theta_hat);
    const Measurement& m = out.measurements[i];
    const double a = m.quadrature == Quadrature::X ? r.x : r.p;
    if (i % cfg.frame_len < cfg.test_pulses_per_frame)
      out.test_pairs.push_back({a, m.value});
    else
      out.data_pairs.push_back({a, m.value});
  }
  return out;
}

/// Config with every noise term off: ideal source, line and detector.
inline SessionConfig ideal_config() {
  SessionConfig cfg;
  cfg.budget_modulation = 0.0;
  cfg.budget_phase = 0.0;
  cfg.budget_electronic = 0.0;
  cfg.detector.efficiency = 1.0;
  cfg.detector.electronic = 0.0;
  cfg.phase_drift = 0.0;
  return cfg;
}

}  // namespace cvqkd::test

#endif
