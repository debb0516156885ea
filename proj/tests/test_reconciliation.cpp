#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "cvqkd/rates.hpp"
#include "cvqkd/reconciliation.hpp"

using namespace cvqkd;
using namespace cvqkd::test;

namespace {

struct ReferencePoint {
  double eta = 0.6, gain = 1.0, xi = 0.06, v_el = 0.01, va = 40.0;
  double slope() const { return std::sqrt(eta * gain); }
  double sigma() const { return std::sqrt(1.0 + eta * gain * xi + v_el); }
  double i_ab() const { return cvqkd::i_ab(va, gain, xi, eta); }
};

struct CorrelatedData {
  std::vector<double> alice, bob;
  double vb = 0.0;
};

CorrelatedData make_data(const ReferencePoint& rp, std::uint32_t n,
                         std::uint64_t seed) {
  Rng rng(seed);
  CorrelatedData d;
  d.alice.resize(n);
  d.bob.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    d.alice[i] = std::sqrt(rp.va) * rng.gaussian();
    d.bob[i] = rp.slope() * d.alice[i] + rp.sigma() * rng.gaussian();
    d.vb += d.bob[i] * d.bob[i];
  }
  d.vb /= n;
  return d;
}

// Independent oracle: H(cell label | alice value) by numeric integration
// over the correlation model, in bits per symbol.
double conditional_entropy_oracle(const SliceCodec& codec, double slope,
                                  double sigma, double va) {
  const std::uint32_t cells = codec.cells();
  const int grid = 4001;
  const double sd = slope * std::sqrt(va);
  const double lo = -8.0 * sd, hi = 8.0 * sd;
  const double step = (hi - lo) / (grid - 1);
  double num = 0.0, den = 0.0;
  for (int gi = 0; gi < grid; ++gi) {
    const double mu = lo + gi * step;
    const double w = std::exp(-0.5 * mu * mu / (sd * sd));
    double h = 0.0;
    double prev = 0.0;
    for (std::uint32_t c = 0; c < cells; ++c) {
      const double cdf = c + 1 < cells
                             ? normal_cdf((codec.boundaries[c] - mu) / sigma)
                             : 1.0;
      const double p = cdf - prev;
      prev = cdf;
      if (p > 0.0) h -= p * std::log2(p);
    }
    num += w * h;
    den += w;
  }
  return num / den;
}

}  // namespace

TEST_CASE("one slice splits at the median") {
  const SliceCodec codec = SliceCodec::design(4.0, 1);
  REQUIRE(codec.boundaries.size() == 1);
  CHECK(codec.boundaries[0] == doctest::Approx(0.0));
}

TEST_CASE("two slices use the standard normal quartiles") {
  const SliceCodec codec = SliceCodec::design(1.0, 2);
  REQUIRE(codec.boundaries.size() == 3);
  CHECK(codec.boundaries[0] == doctest::Approx(-0.6744897502).epsilon(1e-9));
  CHECK(codec.boundaries[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(codec.boundaries[2] == doctest::Approx(0.6744897502).epsilon(1e-9));
}

TEST_CASE("cells fill uniformly") {
  const double vb = 9.0;
  const SliceCodec codec = SliceCodec::design(vb, 5);
  Rng rng(1);
  std::vector<std::uint32_t> counts(codec.cells(), 0);
  const std::size_t n = 1000000;
  for (std::size_t i = 0; i < n; ++i)
    ++counts[codec.cell_of(rng.gaussian(0.0, 3.0))];
  const double expect = static_cast<double>(n) / codec.cells();
  const double bound = 4.0 * std::sqrt(expect);
  for (std::uint32_t c = 0; c < codec.cells(); ++c)
    CHECK(std::fabs(counts[c] - expect) < bound);
}

TEST_CASE("adjacent cells differ in exactly one label bit") {
  const SliceCodec codec = SliceCodec::design(25.0, 5);
  for (std::uint32_t c = 0; c + 1 < codec.cells(); ++c) {
    const std::uint32_t diff =
        SliceCodec::gray(c) ^ SliceCodec::gray(c + 1);
    CHECK((diff & (diff - 1)) == 0);
    CHECK(diff != 0);
  }
}

TEST_CASE("slice count tracks the mutual information") {
  CHECK(choose_slice_count(2.3) == 5);
  CHECK(choose_slice_count(0.4) == 3);
  CHECK(choose_slice_count(0.01) == 3);
  CHECK(choose_slice_count(5.0) == 6);
  CHECK(choose_slice_count(9.0) == 6);
}

TEST_CASE("plan serialization round trips") {
  SlicePlan plan;
  plan.passes = 4;
  plan.slices.push_back({SliceMethod::Disclose, 0, 2});
  plan.slices.push_back({SliceMethod::Syndrome, 12345, 2});
  plan.slices.push_back({SliceMethod::Bisect, 0, 512});
  const SlicePlan back = SlicePlan::deserialize(plan.serialize());
  REQUIRE(back.slices.size() == 3);
  CHECK(back.passes == 4);
  CHECK(back.slices[1].method == SliceMethod::Syndrome);
  CHECK(back.slices[1].syndrome_bits == 12345);
  CHECK(back.slices[2].k1 == 512);
}

TEST_CASE("predicted slice statistics match a sampled block") {
  const ReferencePoint rp;
  const CorrelatedData d = make_data(rp, 200000, 33);
  const SliceCodec codec = SliceCodec::design(d.vb, 5);
  const CorrelationModel model{rp.slope(), rp.sigma()};
  const SliceStats stats = predict_slice_stats(codec, model);
  REQUIRE(stats.error_rate.size() == 5);
  // sampled sequential-estimator error rates, lower slices known
  std::vector<double> sampled(5, 0.0);
  const std::uint32_t cells = codec.cells();
  for (std::size_t i = 0; i < d.alice.size(); ++i) {
    const std::uint32_t cell = codec.cell_of(d.bob[i]);
    const double mu = model.slope * d.alice[i];
    for (std::uint32_t s = 0; s < 5; ++s) {
      const std::uint32_t mask = (1u << s) - 1u;
      double w0 = 0.0, w1 = 0.0;
      double prev = 0.0;
      for (std::uint32_t c = 0; c < cells; ++c) {
        const double cdf =
            c + 1 < cells ? normal_cdf((codec.boundaries[c] - mu) / model.sigma)
                          : 1.0;
        const double p = cdf - prev;
        prev = cdf;
        const std::uint32_t g = SliceCodec::gray(c);
        if ((g & mask) != (SliceCodec::gray(cell) & mask)) continue;
        ((g >> s) & 1u ? w1 : w0) += p;
      }
      sampled[s] += (w1 > w0 ? 1 : 0) != codec.bit(cell, s) ? 1.0 : 0.0;
    }
  }
  for (std::uint32_t s = 0; s < 5; ++s) {
    sampled[s] /= static_cast<double>(d.alice.size());
    CHECK(stats.error_rate[s] == doctest::Approx(sampled[s]).epsilon(0.05));
  }
  const double oracle =
      conditional_entropy_oracle(codec, rp.slope(), rp.sigma(), rp.va);
  double chain = 0.0;
  for (double h : stats.entropy) chain += h;
  CHECK(chain == doctest::Approx(oracle).epsilon(0.01));
}

TEST_CASE("identical inputs reconcile with floor overhead only") {
  std::vector<double> values;
  Rng rng(2);
  for (int i = 0; i < 5000; ++i) values.push_back(rng.gaussian(0.0, 5.0));
  const SliceCodec codec = SliceCodec::design(25.0, 5);
  const CorrelationModel model{1.0, 1e-3};
  const SlicePlan plan = plan_slices(codec, model, 5000);
  for (const SliceAction& a : plan.slices)
    CHECK(a.method == SliceMethod::Bisect);
  const BlockReconciliation rec =
      reconcile_block(values, values, codec, plan, model, 4242);
  CHECK(rec.ok);
  CHECK(rec.alice.bits == rec.bob.bits);
  // only the top-of-pass parities and the final hash ever crossed
  CHECK(rec.bob.ledger.disclosed_bits < 5 * 4 * 10 + 65 + 1);
  CHECK(rec.bob.ledger.disclosed_bits ==
        rec.alice.ledger.disclosed_bits);
}

TEST_CASE("reference point block reconciles with usable efficiency" *
          doctest::timeout(240)) {
  const ReferencePoint rp;
  const CorrelatedData d = make_data(rp, 38000, 77);
  const SliceCodec codec = SliceCodec::design(d.vb, 5);
  const CorrelationModel model{rp.slope(), rp.sigma()};
  const SlicePlan plan = plan_slices(codec, model, 38000);
  const BlockReconciliation rec =
      reconcile_block(d.alice, d.bob, codec, plan, model, 1001);
  REQUIRE(rec.ok);
  CHECK(rec.alice.bits == rec.bob.bits);

  const double beta = measure_beta(rec.bob.ledger, 5, rp.i_ab());
  CHECK(beta >= 0.7);
  CHECK(beta <= 0.9);

  // leakage soundness: no protocol can reveal less than the conditional
  // entropy floor
  const double floor_bits =
      conditional_entropy_oracle(codec, rp.slope(), rp.sigma(), rp.va) * 38000;
  CHECK(static_cast<double>(rec.bob.ledger.disclosed_bits) > floor_bits);

  // ledger self-consistency
  std::uint64_t sum = 0;
  for (std::uint64_t c : rec.bob.ledger.per_slice) sum += c;
  CHECK(sum == rec.bob.ledger.disclosed_bits);
  CHECK(rec.bob.ledger.n_symbols == 38000);
}

TEST_CASE("transcripts and ledgers are deterministic") {
  const ReferencePoint rp;
  const CorrelatedData d = make_data(rp, 8000, 11);
  const SliceCodec codec = SliceCodec::design(d.vb, 4);
  const CorrelationModel model{rp.slope(), rp.sigma()};
  const SlicePlan plan = plan_slices(codec, model, 8000);
  const BlockReconciliation a =
      reconcile_block(d.alice, d.bob, codec, plan, model, 555);
  const BlockReconciliation b =
      reconcile_block(d.alice, d.bob, codec, plan, model, 555);
  CHECK(a.ok);
  CHECK(a.alice.bits == b.alice.bits);
  CHECK(a.bob.key_hash == b.bob.key_hash);
  CHECK(a.bob.ledger.disclosed_bits == b.bob.ledger.disclosed_bits);
  CHECK(a.bob.ledger.per_slice == b.bob.ledger.per_slice);
}

TEST_CASE("a corrupted value still converges and costs extra") {
  // near-clean correlation: the plan bisects every slice, so a planted
  // fault is repaired through probe traffic that shows up in the ledger
  ReferencePoint rp;
  CorrelatedData d;
  Rng rng(13);
  const std::uint32_t n = 8000;
  d.alice.resize(n);
  d.bob.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    d.alice[i] = std::sqrt(rp.va) * rng.gaussian();
    d.bob[i] = d.alice[i] + 0.003 * rng.gaussian();
    d.vb += d.bob[i] * d.bob[i];
  }
  d.vb /= n;
  const SliceCodec codec = SliceCodec::design(d.vb, 4);
  const CorrelationModel model{1.0, 0.003};
  const SlicePlan plan = plan_slices(codec, model, n);
  for (const SliceAction& a : plan.slices)
    CHECK(a.method == SliceMethod::Bisect);
  const BlockReconciliation clean =
      reconcile_block(d.alice, d.bob, codec, plan, model, 999);
  REQUIRE(clean.ok);
  // flip one of Alice's values far out: her estimates for that symbol
  // turn systematically wrong and the protocol has to repair them
  d.alice[1234] = -d.alice[1234] + 8.0;
  const BlockReconciliation faulted =
      reconcile_block(d.alice, d.bob, codec, plan, model, 999);
  CHECK(faulted.ok);
  CHECK(faulted.alice.bits == faulted.bob.bits);
  CHECK(faulted.bob.ledger.disclosed_bits > clean.bob.ledger.disclosed_bits);
}

TEST_CASE("beta accounting boundary cases") {
  LeakageLedger ledger;
  ledger.per_slice.assign(6, 0);
  ledger.n_symbols = 1000;
  // nothing disclosed, m equal to the mutual information
  CHECK(measure_beta(ledger, 2, 2.0) == doctest::Approx(1.0));
  // full disclosure retains nothing
  ledger.add(0, 2000);
  ledger.add(1, 3000);
  CHECK(measure_beta(ledger, 5, 2.297) ==
        doctest::Approx((5.0 - 5.0) / 2.297));
  CHECK_THROWS_AS(measure_beta(ledger, 5, 0.0), InvalidArgument);
}

TEST_CASE("low-information slices fall back to disclosure") {
  // at very low SNR the plan should disclose nearly everything
  const double slope = std::sqrt(0.6);
  const double sigma = 3.0;
  const double vb = 0.6 * 4.0 + sigma * sigma;
  const SliceCodec codec = SliceCodec::design(vb, 3);
  const SlicePlan plan = plan_slices(codec, {slope, sigma}, 10000);
  CHECK(plan.slices[0].method == SliceMethod::Disclose);
}
