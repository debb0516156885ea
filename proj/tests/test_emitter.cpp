#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "helpers.hpp"

using namespace cvqkd;
using namespace cvqkd::test;

namespace {
// exact per-quadrature variance of the radially truncated modulation
const double kTruncationFactor =
    (1.0 - 9.0 * std::exp(-8.0)) / (1.0 - std::exp(-8.0));
}  // namespace

TEST_CASE("data symbols are centered") {
  Rng rng(101);
  const std::size_t n = 1000000;
  double sx = 0.0, sp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Symbol s = draw_symbol(40.0, rng);
    sx += s.x;
    sp += s.p;
  }
  const double bound = 4.0 * std::sqrt(40.0 / n);
  CHECK(std::fabs(sx / n) < bound);
  CHECK(std::fabs(sp / n) < bound);
}

TEST_CASE("truncated modulation variance matches the closed form") {
  // oracle: redraw-until-accepted sampling of a radially truncated 2D
  // Gaussian has per-quadrature variance V_A (1 - 9e^-8)/(1 - e^-8)
  Rng rng(202);
  const std::size_t n = 10000000;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Symbol s = draw_symbol(40.0, rng);
    acc += s.x * s.x + s.p * s.p;
  }
  const double per_quadrature = acc / (2.0 * n);
  CHECK(kTruncationFactor == doctest::Approx(0.9973154).epsilon(1e-5));
  CHECK(per_quadrature == doctest::Approx(40.0 * kTruncationFactor).epsilon(6e-4));
  // spec-level anchor with its quoted tolerance
  CHECK(std::fabs(per_quadrature - 39.879) < 0.06);
}

TEST_CASE("no sample escapes the truncation radius") {
  Rng rng(303);
  const double r2max = 16.0 * 12.5;
  for (int i = 0; i < 200000; ++i) {
    const Symbol s = draw_symbol(12.5, rng);
    CHECK(s.x * s.x + s.p * s.p <= r2max);
  }
}

TEST_CASE("test symbols sit on the published pattern") {
  const double r = 4.0 * std::sqrt(40.0);
  const Symbol s0 = make_test_symbol(0, 40.0, 20);
  CHECK(s0.x == doctest::Approx(25.2982212813).epsilon(1e-9));
  CHECK(s0.p == doctest::Approx(0.0));
  const Symbol s1 = make_test_symbol(1, 40.0, 20);
  CHECK(s1.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s1.p == doctest::Approx(r).epsilon(1e-12));
  const Symbol s4 = make_test_symbol(4, 40.0, 20);
  CHECK(s4.x == doctest::Approx(r / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(s4.p == doctest::Approx(r / std::sqrt(2.0)).epsilon(1e-12));
  // determinism
  for (std::uint32_t i = 0; i < 20; ++i) {
    const Symbol a = make_test_symbol(i, 40.0, 20);
    const Symbol b = make_test_symbol(i, 40.0, 20);
    CHECK(a.x == b.x);
    CHECK(a.p == b.p);
    CHECK(std::hypot(a.x, a.p) == doctest::Approx(r).epsilon(1e-12));
  }
  CHECK_THROWS_AS(make_test_symbol(20, 40.0, 20), InvalidArgument);
}

TEST_CASE("test pattern autocorrelation leaves sync margin") {
  // cyclic self-similarity of the pattern must stay well under the 3 dB
  // ambiguity threshold of the synchronizer
  SessionConfig cfg;
  const FramePlan plan = FramePlan::make(cfg);
  const std::uint32_t frame = cfg.frame_len;
  const std::uint32_t nt = cfg.test_pulses_per_frame;
  double worst = 0.0;
  for (std::uint32_t shift = 1; shift < frame; ++shift) {
    double re = 0.0, im = 0.0;
    for (std::uint32_t j = 0; j < nt; ++j) {
      const std::uint32_t k = (j + shift) % frame;
      if (k >= nt) continue;
      const Symbol& a = plan.test_pattern[j];
      const Symbol& b = plan.test_pattern[k];
      // <a|b> with unit amplitudes
      re += (a.x * b.x + a.p * b.p);
      im += (a.x * b.p - a.p * b.x);
    }
    const double r2 = 16.0 * cfg.modulation_variance;
    worst = std::max(worst, std::hypot(re, im) / (nt * r2));
  }
  CHECK(worst < 0.45);
}

TEST_CASE("frame layout and modulator noise budget") {
  SessionConfig cfg;
  cfg.phase_drift = 0.0;
  Emitter emitter(cfg, 404);
  std::size_t test_count = 0;
  double acc = 0.0, acc_dx = 0.0;
  std::size_t n_data = 0;
  for (int f = 0; f < 12500; ++f) {  // 1e6 data pulses
    const auto frame = emitter.emit_frame();
    REQUIRE(frame.size() == 100);
    for (std::size_t i = 0; i < frame.size(); ++i) {
      const auto& [sym, pulse] = frame[i];
      if (pulse.kind == PulseKind::Test) {
        ++test_count;
        continue;
      }
      const double dx = pulse.mean_x - sym.x;
      const double dp = pulse.mean_p - sym.p;
      acc += dx * dx + dp * dp;
      acc_dx += dx;
      n_data += 2;
    }
  }
  CHECK(test_count == 12500u * 20u);
  CHECK(acc / n_data == doctest::Approx(0.04).epsilon(0.025));
  CHECK(std::fabs(acc / n_data - 0.04) < 0.001);
  // the imperfection is zero-mean
  CHECK(std::fabs(acc_dx / (n_data / 2)) < 4.0 * std::sqrt(0.04 / (n_data / 2)));
}

TEST_CASE("noiseless modulator emits the symbols exactly") {
  SessionConfig cfg;
  cfg.budget_modulation = 0.0;
  Emitter emitter(cfg, 505);
  for (auto& [sym, pulse] : emitter.emit_frame()) {
    CHECK(pulse.mean_x == sym.x);
    CHECK(pulse.mean_p == sym.p);
  }
}

TEST_CASE("source excess budget scales with the modulation variance") {
  SessionConfig cfg;
  Emitter at40(cfg, 1);
  cfg.modulation_variance = 10.0;
  Emitter at10(cfg, 1);
  CHECK(at10.modulator_noise_variance() ==
        doctest::Approx(at40.modulator_noise_variance() / 4.0));
  CHECK(at10.source_excess_variance() ==
        doctest::Approx(at40.source_excess_variance() / 4.0));
  CHECK(at40.source_excess_variance() == doctest::Approx(0.02));
}

TEST_CASE("default budget reproduces the measured total excess noise") {
  // full characterization block: estimate the input-referred excess with
  // the channel wide open and only the source budget active
  SessionConfig cfg;
  const SimulatedBlock block = simulate_block(cfg, {}, 10);
  std::vector<EstimationPair> all = block.test_pairs;
  all.insert(all.end(), block.data_pairs.begin(), block.data_pairs.end());
  const ChannelEstimate est = estimate_channel(
      all, cfg.detector.efficiency, cfg.detector.electronic, 0.0);
  CHECK(est.gain == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::fabs(est.xi - 0.06) < 0.005);
}
