#ifndef CVQKD_RECONCILIATION_HPP
#define CVQKD_RECONCILIATION_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cvqkd/core.hpp"

namespace cvqkd {

using Bytes = std::vector<std::uint8_t>;

/// Quantizer for Bob's measurements: 2^m equiprobable cells under
/// N(0, V_B), labeled in reflected-binary order so adjacent cells differ
/// in exactly one bit. Slice s is bit s of the label, least significant
/// first.
struct SliceCodec {
  std::uint32_t m = 5;
  std::vector<double> boundaries;  // 2^m - 1 ascending interior boundaries

  static SliceCodec design(double v_b, std::uint32_t m);

  std::uint32_t cells() const { return 1u << m; }
  std::uint32_t cell_of(double y) const;
  static std::uint32_t gray(std::uint32_t cell) { return cell ^ (cell >> 1); }
  int bit(std::uint32_t cell, std::uint32_t slice) const {
    return static_cast<int>((gray(cell) >> slice) & 1u);
  }
};

/// Linear model Alice uses for Bob's value given her own:
/// y ~ N(slope * a, sigma^2).
struct CorrelationModel {
  double slope = 0.0;
  double sigma = 1.0;
};

/// Number of slices for a given mutual information: ceil(i_ab) + 2,
/// clamped to [2, 6].
std::uint32_t choose_slice_count(double i_ab_bits);

/// Every key-dependent bit that crossed the classical channel during
/// reconciliation. per_slice has m+1 entries; the last one holds the
/// final verification-hash bits.
struct LeakageLedger {
  std::vector<std::uint64_t> per_slice;
  std::uint64_t disclosed_bits = 0;
  std::uint64_t n_symbols = 0;

  void add(std::size_t slice, std::uint64_t bits) {
    per_slice.at(slice) += bits;
    disclosed_bits += bits;
  }
};

/// How one slice gets corrected.
///   Disclose: Bob sends the slice verbatim; cheapest once the hard
///     estimate is near a coin flip.
///   Syndrome: Bob sends the syndrome of a seeded sparse parity code;
///     Alice decodes it by belief propagation seeded with her per-symbol
///     posteriors. Residual failures fall back to bisection cleanup.
///   Bisect: interactive block-parity bisection with shuffled passes;
///     used when the slice is already nearly clean.
enum class SliceMethod : std::uint8_t {
  Disclose = 0,
  Syndrome = 1,
  Bisect = 2,
};

struct SliceAction {
  SliceMethod method = SliceMethod::Bisect;
  std::uint32_t syndrome_bits = 0;  // Syndrome method
  std::uint32_t k1 = 4096;          // Bisect: first-pass block size
};

struct SlicePlan {
  std::vector<SliceAction> slices;
  std::uint32_t passes = 4;  // bisection passes (initial or cleanup)

  Bytes serialize() const;
  static SlicePlan deserialize(const Bytes& b);
};

/// Predicted per-slice statistics of Alice's sequential estimator under
/// the correlation model, by numeric integration (no sampling): hard
/// error rate and conditional entropy of each slice given the lower ones.
struct SliceStats {
  std::vector<double> error_rate;
  std::vector<double> entropy;  // bits/symbol, sums to H(label | alice)
};

SliceStats predict_slice_stats(const SliceCodec& codec,
                               const CorrelationModel& model);

/// Chooses per-slice methods from the predicted statistics.
/// syndrome_rate_factor is the syndrome length in units of the slice's
/// conditional entropy.
SlicePlan plan_slices(const SliceCodec& codec, const CorrelationModel& model,
                      std::uint32_t n_symbols,
                      double syndrome_rate_factor = 1.28);

// Protocol messages ride an abstract ordered duplex transport. The
// session layer maps kinds onto wire frames one-to-one; tests use an
// in-memory queue pair.
enum class ReconMsgKind : std::uint8_t {
  ParityReq = 0,    // Alice -> Bob: probe ranges / phase markers
  ParityRsp = 1,    // Bob -> Alice: parity, syndrome or disclosure bits
  ShuffleSeed = 2,  // Bob -> Alice: permutation or code seed
  VerifyHash = 3,   // final equality check
};

struct ReconMsg {
  ReconMsgKind kind;
  Bytes payload;
};

struct ReconTransport {
  std::function<void(const ReconMsg&)> send;
  std::function<ReconMsg()> recv;
};

struct ReconResult {
  std::vector<std::uint8_t> bits;  // slice-major: bits[s * n + i]
  LeakageLedger ledger;
  bool verified = false;
  std::uint64_t key_hash = 0;
};

/// Bob's side: quantizes his values, serves syndromes and parities,
/// sends the final hash. shuffle_seed_base feeds every seed the protocol
/// needs (permutations, code graphs).
ReconResult reconcile_bob(std::span<const double> bob_values,
                          const SliceCodec& codec, const SlicePlan& plan,
                          std::uint64_t shuffle_seed_base,
                          ReconTransport& transport);

/// Alice's side: estimates Bob's slices from her correlated values and
/// corrects them until the final hashes agree.
ReconResult reconcile_alice(std::span<const double> alice_values,
                            const SliceCodec& codec, const SlicePlan& plan,
                            const CorrelationModel& model,
                            ReconTransport& transport);

struct BlockReconciliation {
  ReconResult alice;
  ReconResult bob;
  bool ok = false;  // hashes matched
};

/// Runs both ends over an in-process transport. Convenience for tests and
/// the throughput benchmark; the session layer drives the two ends over
/// real links instead.
BlockReconciliation reconcile_block(std::span<const double> alice_values,
                                    std::span<const double> bob_values,
                                    const SliceCodec& codec,
                                    const SlicePlan& plan,
                                    const CorrelationModel& model,
                                    std::uint64_t shuffle_seed_base);

/// Reconciliation efficiency relative to the Shannon limit:
/// (m - disclosed/n) / i_ab, floored at zero.
double measure_beta(const LeakageLedger& ledger, std::uint32_t m,
                    double i_ab_shannon);

}  // namespace cvqkd

#endif
