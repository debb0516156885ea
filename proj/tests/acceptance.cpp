// Acceptance suite: every release gate in one binary, one line each.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "cvqkd/privacy.hpp"
#include "cvqkd/rates.hpp"
#include "cvqkd/reconciliation.hpp"
#include "cvqkd/session.hpp"

using namespace cvqkd;
using namespace cvqkd::test;

namespace {

struct Criterion {
  int id;
  const char* title;
  std::function<bool(std::string&)> run;
  double time_budget_s;
};

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.5g", v);
  return buf;
}

// --------------------------------------------------------------------------

bool closed_form_engine(std::string& detail) {
  const double iab = i_ab(40, 1, 0, 0.6);
  const double ibe = i_be_max(40, 1, 0, 0.6);
  detail = "i_ab=" + fmt(iab) + " i_be=" + fmt(ibe);
  return std::fabs(iab - 2.32193) <= 1e-5 && std::fabs(ibe) <= 1e-10;
}

bool margined_range(std::string& detail) {
  auto delta = [](double km) {
    const double g = gain_from_distance(km, 0.2);
    const double xi = apply_output_margin(0.06, g, 0.6, 0.02);
    return delta_i_eff(40, g, xi, 0.6, 1.0);
  };
  const double at55 = delta(55.0), at60 = delta(60.0);
  detail = "dI(55km)=" + fmt(at55) + " dI(60km)=" + fmt(at60);
  return at55 > 0.0 && at60 < 0.0;
}

bool effective_range(std::string& detail) {
  MaxDistanceQuery q;
  q.beta = 0.8;
  q.optimize = true;
  const DistanceLimit with_opt = max_distance(q);
  q.optimize = false;
  const DistanceLimit fixed = max_distance(q);
  detail = "optimized=" + fmt(with_opt.km) + "km fixed=" + fmt(fixed.km) + "km";
  return !with_opt.at_cap && with_opt.km >= 15.0 && with_opt.km <= 30.0 &&
         fixed.km >= 10.0 && fixed.km <= 15.0;
}

bool interception_bound(std::string& detail) {
  // characterization session: source imperfections off so the estimate
  // isolates the attack's own contribution; a large revealed sample
  // tightens the estimate
  SessionConfig cfg;
  cfg.budget_modulation = 0.0;
  cfg.budget_phase = 0.0;
  cfg.budget_electronic = 0.0;
  cfg.reveal_fraction = 0.5;
  cfg.rng_seed = 424201;
  SessionOptions opts;
  opts.attack.variant = AttackVariant::InterceptResend;
  opts.record_transcripts = false;
  const SessionOutcome out = run_session(cfg, opts);
  if (out.done() || out.blocks.empty()) {
    detail = "session did not abort";
    return false;
  }
  const double xi = out.blocks[0].est.xi;
  detail = "xi_hat=" + fmt(xi) +
           " abort=" + abort_reason_name(out.abort_reason) +
           " key_bits=" + fmt(double(out.total_secret_bits()));
  return std::fabs(xi - 2.0) <= 0.05 &&
         out.abort_reason == AbortReason::NoPositiveRate &&
         out.total_secret_bits() == 0;
}

bool noise_budget(std::string& detail) {
  SessionConfig cfg;
  const SimulatedBlock block = simulate_block(cfg, {}, 2);
  std::vector<EstimationPair> all = block.test_pairs;
  all.insert(all.end(), block.data_pairs.begin(), block.data_pairs.end());
  const ChannelEstimate est = estimate_channel(
      all, cfg.detector.efficiency, cfg.detector.electronic, 0.0);
  detail = "xi_hat=" + fmt(est.xi) + " (se=" + fmt(est.se_xi) + ")";
  return std::fabs(est.xi - 0.06) <= 0.01;
}

bool truncation_property(std::string& detail) {
  Rng rng(2025);
  const std::size_t n = 10000000;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Symbol s = draw_symbol(40.0, rng);
    acc += s.x * s.x + s.p * s.p;
  }
  const double per_quadrature = acc / (2.0 * n);
  detail = "var=" + fmt(per_quadrature) + " target=" + fmt(0.99698 * 40.0);
  return std::fabs(per_quadrature - 0.99698 * 40.0) <= 0.0005 * 40.0;
}

bool receiver_identity(std::string& detail) {
  std::ostringstream all;
  bool ok = true;
  int idx = 0;
  for (double g : {1.0, 0.5, 0.1}) {
    for (double xi : {0.0, 0.06}) {
      SessionConfig cfg;
      cfg.phase_drift = 0.0;
      cfg.rng_seed = 77;
      // route the full excess through the channel so the input-referred
      // total is exactly the grid value
      cfg.budget_modulation = 0.0;
      cfg.budget_phase = 0.0;
      cfg.budget_electronic = 0.0;
      cfg.channel.gain = g;
      cfg.channel.excess = xi;
      const SimulatedBlock block = simulate_block(cfg, {}, 1300 + idx, false);
      std::vector<double> data;
      for (std::size_t i = 0; i < block.measurements.size(); ++i)
        if (i % cfg.frame_len >= cfg.test_pulses_per_frame)
          data.push_back(block.measurements[i].value);
      const double v = variance(data);
      const double expect = 0.6 * g * 40.0 + 1.0 + 0.6 * g * xi + 0.01;
      const double se = expect * std::sqrt(2.0 / data.size());
      if (std::fabs(v - expect) > 3.0 * se) ok = false;
      all << " (" << g << "," << xi << "):" << fmt(v) << "/" << fmt(expect);
      ++idx;
    }
  }
  detail = all.str();
  return ok;
}

bool reconciliation_quality(std::string& detail) {
  const double eta = 0.6, gain = 1.0, xi = 0.06, v_el = 0.01, va = 40.0;
  const double slope = std::sqrt(eta * gain);
  const double sigma = std::sqrt(1.0 + eta * gain * xi + v_el);
  const double iab = i_ab(va, gain, xi, eta);
  bool identical = true;
  double beta = 0.0, floor_ratio = 0.0;
  for (std::uint64_t seed : {501u, 502u, 503u}) {
    Rng rng(seed);
    const std::uint32_t n = 38000;
    std::vector<double> alice(n), bob(n);
    double vb = 0.0;
    for (std::uint32_t i = 0; i < n; ++i) {
      alice[i] = std::sqrt(va) * rng.gaussian();
      bob[i] = slope * alice[i] + sigma * rng.gaussian();
      vb += bob[i] * bob[i];
    }
    vb /= n;
    const SliceCodec codec = SliceCodec::design(vb, choose_slice_count(iab));
    const CorrelationModel model{slope, sigma};
    const SlicePlan plan = plan_slices(codec, model, n);
    const BlockReconciliation rec =
        reconcile_block(alice, bob, codec, plan, model, seed * 13);
    if (!rec.ok || rec.alice.bits != rec.bob.bits) identical = false;
    beta = measure_beta(rec.bob.ledger, codec.m, iab);

    // numerically integrated conditional entropy of the label given
    // Alice's value: the Slepian-Wolf floor for any correction scheme
    const std::uint32_t cells = codec.cells();
    const int grid = 4001;
    const double sd = slope * std::sqrt(va);
    double num = 0.0, den = 0.0;
    for (int gi = 0; gi < grid; ++gi) {
      const double mu = -8.0 * sd + 16.0 * sd * gi / (grid - 1);
      const double w = std::exp(-0.5 * mu * mu / (sd * sd));
      double h = 0.0, prev = 0.0;
      for (std::uint32_t c = 0; c < cells; ++c) {
        const double cdf =
            c + 1 < cells ? normal_cdf((codec.boundaries[c] - mu) / sigma)
                          : 1.0;
        const double p = cdf - prev;
        prev = cdf;
        if (p > 0.0) h -= p * std::log2(p);
      }
      num += w * h;
      den += w;
    }
    const double floor_bits = num / den * n;
    floor_ratio =
        static_cast<double>(rec.bob.ledger.disclosed_bits) / floor_bits;
    if (floor_ratio < 1.0) identical = false;
  }
  detail = "beta=" + fmt(beta) + " leak/floor=" + fmt(floor_ratio);
  return identical && beta >= 0.7;
}

bool end_to_end_determinism(std::string& detail) {
  SessionConfig cfg;
  cfg.rng_seed = 42;
  const SessionOutcome a = run_session(cfg);
  const SessionOutcome b = run_session(cfg);
  if (!a.done() || !b.done()) {
    detail = "session aborted";
    return false;
  }
  const bool transcripts =
      a.alice_transcript.serialize() == b.alice_transcript.serialize() &&
      a.bob_transcript.serialize() == b.bob_transcript.serialize();
  const bool keys = a.bob_keys[0].bytes == b.bob_keys[0].bytes &&
                    a.alice_keys[0].bytes == a.bob_keys[0].bytes &&
                    confirm_keys(a.alice_keys[0], a.bob_keys[0]);
  detail = std::string("transcripts ") + (transcripts ? "match" : "differ") +
           ", keys " + (keys ? "match" : "differ") +
           ", l=" + fmt(double(a.bob_keys[0].length));
  return transcripts && keys;
}

bool throughput(std::string& detail) {
  SessionConfig cfg;
  cfg.rng_seed = 7;
  Emitter emitter(cfg, derive_seed(7, 1));
  ChannelModel channel(cfg, {}, derive_seed(7, 3));
  Receiver receiver(cfg.detector, derive_seed(7, 2));
  double sink = 0.0;
  std::uint64_t produced = 0;
  const double t0 = now_s();
  while (produced < 2000000) {
    for (auto& [sym, pulse] : emitter.emit_frame()) {
      sink += receiver.measure(channel.propagate(pulse), produced).value;
      ++produced;
      (void)sym;
    }
  }
  const double pipeline = produced / (now_s() - t0);

  // reconciliation throughput, reported against the ~100 kHz figure of
  // comparable software stacks (informational, not gating)
  Rng rng(99);
  const std::uint32_t n = 38000;
  std::vector<double> alice(n), bob(n);
  double vb = 0.0;
  const double slope = std::sqrt(0.6), sigma = std::sqrt(1.046);
  for (std::uint32_t i = 0; i < n; ++i) {
    alice[i] = std::sqrt(40.0) * rng.gaussian();
    bob[i] = slope * alice[i] + sigma * rng.gaussian();
    vb += bob[i] * bob[i];
  }
  vb /= n;
  const SliceCodec codec = SliceCodec::design(vb, 5);
  const CorrelationModel model{slope, sigma};
  const SlicePlan plan = plan_slices(codec, model, n);
  const double r0 = now_s();
  const BlockReconciliation rec =
      reconcile_block(alice, bob, codec, plan, model, 4);
  const double recon = n / (now_s() - r0);
  detail = "pipeline=" + fmt(pipeline) + "/s reconciliation=" + fmt(recon) +
           "/s" + (std::isfinite(sink) ? "" : "?");
  return pipeline >= 1e6 && rec.ok;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {1, "closed-form engine anchors", closed_form_engine, 1.0},
      {2, "margined rate crosses between 55 and 60 km", margined_range, 1.0},
      {3, "effective range with and without optimization", effective_range,
       5.0},
      {4, "interception doubles the input noise and kills the key",
       interception_bound, 10.0},
      {5, "source budget reproduces the measured excess noise", noise_budget,
       10.0},
      {6, "truncated modulation variance", truncation_property, 30.0},
      {7, "receiver variance identity on the loss/noise grid",
       receiver_identity, 60.0},
      {8, "reconciliation correctness, efficiency and leakage floor",
       reconciliation_quality, 360.0},
      {9, "deterministic transcripts and matching keys",
       end_to_end_determinism, 120.0},
      {10, "pipeline throughput at the symbol rate", throughput, 120.0},
  };

  int failures = 0;
  for (Criterion& c : criteria) {
    std::string detail;
    const double t0 = now_s();
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double dt = now_s() - t0;
    if (dt > c.time_budget_s) {
      ok = false;
      detail += " [over time budget]";
    }
    std::printf("%s criterion %2d: %s (%s) [%.2fs]\n", ok ? "PASS" : "FAIL",
                c.id, c.title, detail.c_str(), dt);
    if (!ok) ++failures;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
