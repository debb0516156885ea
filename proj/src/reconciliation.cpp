#include "cvqkd/reconciliation.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <set>
#include <thread>

#include "cvqkd/rng.hpp"

namespace cvqkd {

namespace {

constexpr std::uint8_t kCleanupPass = 0xFE;
constexpr double kLlrClamp = 28.0;
constexpr std::uint32_t kMaxBpIterations = 80;

void put_u32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(Bytes& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
std::uint32_t get_u32(const Bytes& b, std::size_t& at) {
  if (at + 4 > b.size()) throw Error("reconciliation: short payload");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at++]) << (8 * i);
  return v;
}
std::uint64_t get_u64(const Bytes& b, std::size_t& at) {
  if (at + 8 > b.size()) throw Error("reconciliation: short payload");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[at++]) << (8 * i);
  return v;
}
std::uint8_t get_u8(const Bytes& b, std::size_t& at) {
  if (at >= b.size()) throw Error("reconciliation: short payload");
  return b[at++];
}

Bytes pack_bits(std::span<const std::uint8_t> bits) {
  Bytes out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  return out;
}
std::vector<std::uint8_t> unpack_bits(const Bytes& bytes, std::size_t nbits,
                                      std::size_t at) {
  if (at + (nbits + 7) / 8 > bytes.size())
    throw Error("reconciliation: truncated bit payload");
  std::vector<std::uint8_t> out(nbits);
  for (std::size_t i = 0; i < nbits; ++i)
    out[i] = (bytes[at + i / 8] >> (i % 8)) & 1u;
  return out;
}

struct ParityReqMsg {
  std::uint8_t slice = 0;
  std::uint8_t pass = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> ranges;
};

ReconMsg make_parity_req(const ParityReqMsg& m) {
  Bytes b;
  b.push_back(m.slice);
  b.push_back(m.pass);
  put_u32(b, static_cast<std::uint32_t>(m.ranges.size()));
  for (auto [start, len] : m.ranges) {
    put_u32(b, start);
    put_u32(b, len);
  }
  return {ReconMsgKind::ParityReq, std::move(b)};
}
ParityReqMsg parse_parity_req(const ReconMsg& msg) {
  if (msg.kind != ReconMsgKind::ParityReq)
    throw Error("reconciliation: expected ParityReq");
  ParityReqMsg m;
  std::size_t at = 0;
  m.slice = get_u8(msg.payload, at);
  m.pass = get_u8(msg.payload, at);
  const std::uint32_t count = get_u32(msg.payload, at);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t start = get_u32(msg.payload, at);
    const std::uint32_t len = get_u32(msg.payload, at);
    m.ranges.emplace_back(start, len);
  }
  return m;
}

ReconMsg make_parity_rsp(std::uint8_t slice, std::uint8_t pass,
                         std::span<const std::uint8_t> bits) {
  Bytes b;
  b.push_back(slice);
  b.push_back(pass);
  put_u32(b, static_cast<std::uint32_t>(bits.size()));
  const Bytes packed = pack_bits(bits);
  b.insert(b.end(), packed.begin(), packed.end());
  return {ReconMsgKind::ParityRsp, std::move(b)};
}
std::vector<std::uint8_t> parse_parity_rsp(const ReconMsg& msg,
                                           std::uint8_t expect_slice) {
  if (msg.kind != ReconMsgKind::ParityRsp)
    throw Error("reconciliation: expected ParityRsp");
  std::size_t at = 0;
  const std::uint8_t slice = get_u8(msg.payload, at);
  get_u8(msg.payload, at);  // pass
  if (slice != expect_slice) throw Error("reconciliation: slice mismatch");
  const std::uint32_t nbits = get_u32(msg.payload, at);
  return unpack_bits(msg.payload, nbits, at);
}

ReconMsg make_shuffle_seed(std::uint8_t slice, std::uint8_t pass,
                           std::uint64_t seed) {
  Bytes b;
  b.push_back(slice);
  b.push_back(pass);
  put_u64(b, seed);
  return {ReconMsgKind::ShuffleSeed, std::move(b)};
}
std::uint64_t parse_shuffle_seed(const ReconMsg& msg,
                                 std::uint8_t expect_slice,
                                 std::uint8_t expect_pass) {
  if (msg.kind != ReconMsgKind::ShuffleSeed)
    throw Error("reconciliation: expected ShuffleSeed");
  std::size_t at = 0;
  if (get_u8(msg.payload, at) != expect_slice ||
      get_u8(msg.payload, at) != expect_pass)
    throw Error("reconciliation: seed for wrong slice or pass");
  return get_u64(msg.payload, at);
}

ReconMsg make_verify(std::uint8_t who, std::uint64_t value, std::uint8_t ok) {
  Bytes b;
  b.push_back(who);
  put_u64(b, value);
  b.push_back(ok);
  return {ReconMsgKind::VerifyHash, std::move(b)};
}

// Sparse parity-check code, dv = 3 edges per variable, built from a
// seeded shuffle. Duplicate variables within one check cancel over GF(2)
// and are removed, which also keeps the decoding graph simple.
struct ParityGraph {
  std::vector<std::uint32_t> check_ptr;  // r+1
  std::vector<std::uint32_t> var;        // edge -> variable
  std::uint32_t n = 0;

  static ParityGraph build(std::uint32_t n, std::uint32_t r,
                           std::uint64_t seed) {
    if (r == 0 || n == 0) throw InvalidArgument("ParityGraph: empty code");
    constexpr std::uint32_t dv = 3;
    std::vector<std::uint32_t> sockets(static_cast<std::size_t>(n) * dv);
    for (std::uint32_t v = 0; v < n; ++v)
      for (std::uint32_t d = 0; d < dv; ++d) sockets[v * dv + d] = v;
    Rng rng(seed);
    rng.shuffle(sockets);

    ParityGraph g;
    g.n = n;
    g.check_ptr.reserve(r + 1);
    g.check_ptr.push_back(0);
    const std::size_t total = sockets.size();
    std::size_t pos = 0;
    std::vector<std::uint32_t> scratch;
    for (std::uint32_t c = 0; c < r; ++c) {
      const std::size_t take = total / r + (c < total % r ? 1 : 0);
      scratch.assign(sockets.begin() + pos, sockets.begin() + pos + take);
      pos += take;
      std::sort(scratch.begin(), scratch.end());
      // keep variables appearing an odd number of times
      for (std::size_t i = 0; i < scratch.size();) {
        std::size_t j = i;
        while (j < scratch.size() && scratch[j] == scratch[i]) ++j;
        if ((j - i) % 2 == 1) g.var.push_back(scratch[i]);
        i = j;
      }
      g.check_ptr.push_back(static_cast<std::uint32_t>(g.var.size()));
    }
    return g;
  }

  std::uint32_t checks() const {
    return static_cast<std::uint32_t>(check_ptr.size() - 1);
  }

  std::vector<std::uint8_t> syndrome(
      std::span<const std::uint8_t> bits) const {
    std::vector<std::uint8_t> s(checks(), 0);
    for (std::uint32_t c = 0; c < checks(); ++c) {
      std::uint8_t acc = 0;
      for (std::uint32_t e = check_ptr[c]; e < check_ptr[c + 1]; ++e)
        acc ^= bits[var[e]];
      s[c] = acc;
    }
    return s;
  }
};

// Sum-product decoding toward a target syndrome, seeded with per-bit
// prior LLRs (log P0/P1). Returns the hard decision and whether the
// syndrome was met.
struct BpOutcome {
  std::vector<std::uint8_t> bits;
  std::vector<double> posterior_llr;
  bool converged = false;
};

BpOutcome bp_decode(const ParityGraph& g, std::span<const double> prior_llr,
                    std::span<const std::uint8_t> syndrome) {
  const std::uint32_t n = g.n;
  const std::uint32_t r = g.checks();
  const std::size_t edges = g.var.size();
  std::vector<double> msg(edges, 0.0);
  std::vector<double> tot(n);
  BpOutcome out;
  out.bits.assign(n, 0);

  for (std::uint32_t iter = 0; iter < kMaxBpIterations; ++iter) {
    for (std::uint32_t v = 0; v < n; ++v) tot[v] = prior_llr[v];
    for (std::size_t e = 0; e < edges; ++e) tot[g.var[e]] += msg[e];
    for (std::uint32_t v = 0; v < n; ++v) out.bits[v] = tot[v] < 0.0;

    bool satisfied = true;
    for (std::uint32_t c = 0; c < r && satisfied; ++c) {
      std::uint8_t acc = 0;
      for (std::uint32_t e = g.check_ptr[c]; e < g.check_ptr[c + 1]; ++e)
        acc ^= out.bits[g.var[e]];
      if (acc != syndrome[c]) satisfied = false;
    }
    if (satisfied) {
      out.converged = true;
      break;
    }

    for (std::uint32_t c = 0; c < r; ++c) {
      const std::uint32_t e0 = g.check_ptr[c], e1 = g.check_ptr[c + 1];
      double prod = 1.0;
      int zeros = 0;
      std::size_t zero_edge = 0;
      for (std::uint32_t e = e0; e < e1; ++e) {
        const double ext =
            std::clamp(tot[g.var[e]] - msg[e], -kLlrClamp, kLlrClamp);
        double t = std::tanh(0.5 * ext);
        if (std::fabs(t) < 1e-12) {
          ++zeros;
          zero_edge = e;
          t = 1.0;  // excluded from the running product
        }
        msg[e] = t;  // reuse storage for tanh values this half-iteration
        prod *= t;
      }
      const double sign = syndrome[c] ? -1.0 : 1.0;
      for (std::uint32_t e = e0; e < e1; ++e) {
        double others;
        if (zeros == 0)
          others = prod / msg[e];
        else if (zeros == 1 && e == zero_edge)
          others = prod;
        else
          others = 0.0;
        others = std::clamp(sign * others, -(1.0 - 1e-12), 1.0 - 1e-12);
        msg[e] = std::clamp(2.0 * std::atanh(others), -25.0, 25.0);
      }
    }
  }

  for (std::uint32_t v = 0; v < n; ++v) tot[v] = prior_llr[v];
  for (std::size_t e = 0; e < edges; ++e) tot[g.var[e]] += msg[e];
  out.posterior_llr = tot;
  if (!out.converged)
    for (std::uint32_t v = 0; v < n; ++v) out.bits[v] = tot[v] < 0.0;
  return out;
}

std::vector<std::uint32_t> make_permutation(std::uint32_t n,
                                            std::uint64_t seed,
                                            bool identity) {
  std::vector<std::uint32_t> perm(n);
  for (std::uint32_t i = 0; i < n; ++i) perm[i] = i;
  if (!identity) {
    Rng rng(seed);
    rng.shuffle(perm);
  }
  return perm;
}

Bytes canonical_packed(const std::vector<std::uint8_t>& bits) {
  return pack_bits(bits);
}

}  // namespace

SliceCodec SliceCodec::design(double v_b, std::uint32_t m) {
  if (!(v_b > 0.0)) throw InvalidArgument("SliceCodec: V_B must be > 0");
  if (m < 1 || m > 8) throw InvalidArgument("SliceCodec: m must be in [1, 8]");
  SliceCodec codec;
  codec.m = m;
  const std::uint32_t cells = 1u << m;
  const double sd = std::sqrt(v_b);
  codec.boundaries.reserve(cells - 1);
  for (std::uint32_t k = 1; k < cells; ++k)
    codec.boundaries.push_back(
        sd * inverse_normal_cdf(static_cast<double>(k) / cells));
  return codec;
}

std::uint32_t SliceCodec::cell_of(double y) const {
  const auto it = std::upper_bound(boundaries.begin(), boundaries.end(), y);
  return static_cast<std::uint32_t>(it - boundaries.begin());
}

std::uint32_t choose_slice_count(double i_ab_bits) {
  const double raw = std::ceil(i_ab_bits) + 2.0;
  return static_cast<std::uint32_t>(std::clamp(raw, 2.0, 6.0));
}

Bytes SlicePlan::serialize() const {
  Bytes b;
  b.push_back(static_cast<std::uint8_t>(slices.size()));
  b.push_back(static_cast<std::uint8_t>(passes));
  for (const SliceAction& a : slices) {
    b.push_back(static_cast<std::uint8_t>(a.method));
    put_u32(b, a.syndrome_bits);
    put_u32(b, a.k1);
  }
  return b;
}

SlicePlan SlicePlan::deserialize(const Bytes& b) {
  SlicePlan plan;
  std::size_t at = 0;
  const std::uint8_t m = get_u8(b, at);
  plan.passes = get_u8(b, at);
  for (std::uint8_t s = 0; s < m; ++s) {
    SliceAction a;
    const std::uint8_t method = get_u8(b, at);
    if (method > 2) throw Error("SlicePlan: bad method");
    a.method = static_cast<SliceMethod>(method);
    a.syndrome_bits = get_u32(b, at);
    a.k1 = get_u32(b, at);
    plan.slices.push_back(a);
  }
  if (plan.passes == 0 || plan.passes > 8)
    throw Error("SlicePlan: bad pass count");
  return plan;
}

SliceStats predict_slice_stats(const SliceCodec& codec,
                               const CorrelationModel& model) {
  const std::uint32_t m = codec.m;
  const std::uint32_t cells = codec.cells();
  SliceStats stats;
  stats.error_rate.assign(m, 0.0);
  stats.entropy.assign(m, 0.0);
  if (!(model.sigma > 0.0) || !(std::fabs(model.slope) > 0.0)) return stats;

  // The codec was designed for N(0, V_B); recover V_B from its outermost
  // boundary, then integrate over the conditional mean mu = slope * a,
  // whose variance is V_B - sigma^2 under the model.
  const double z_last =
      inverse_normal_cdf(static_cast<double>(cells - 1) / cells);
  const double vb = std::pow(codec.boundaries.back() / z_last, 2.0);
  const double mu_var = std::max(vb - model.sigma * model.sigma, 1e-9);
  const double mu_sd = std::sqrt(mu_var);

  const int grid = 801;
  const double lo = -8.0 * mu_sd, hi = 8.0 * mu_sd;
  const double step = (hi - lo) / (grid - 1);
  std::vector<double> cellp(cells);
  double wsum = 0.0;
  std::vector<double> err(m, 0.0), ent(m, 0.0);
  for (int gi = 0; gi < grid; ++gi) {
    const double mu = lo + gi * step;
    const double w = std::exp(-0.5 * mu * mu / mu_var);
    wsum += w;
    double prev = 0.0;
    for (std::uint32_t c = 0; c < cells - 1; ++c) {
      const double cdf = normal_cdf((codec.boundaries[c] - mu) / model.sigma);
      cellp[c] = cdf - prev;
      prev = cdf;
    }
    cellp[cells - 1] = 1.0 - prev;

    for (std::uint32_t s = 0; s < m; ++s) {
      const std::uint32_t mask = (1u << s) - 1u;
      // group cells by their lower-slice pattern
      for (std::uint32_t pat = 0; pat <= mask; ++pat) {
        double w0 = 0.0, w1 = 0.0;
        for (std::uint32_t c = 0; c < cells; ++c) {
          const std::uint32_t gray = SliceCodec::gray(c);
          if ((gray & mask) != pat) continue;
          if ((gray >> s) & 1u)
            w1 += cellp[c];
          else
            w0 += cellp[c];
        }
        const double tot = w0 + w1;
        if (tot <= 0.0) continue;
        const double q1 = w1 / tot;
        const double e = std::min(q1, 1.0 - q1);
        double h = 0.0;
        if (q1 > 0.0 && q1 < 1.0)
          h = -q1 * std::log2(q1) - (1.0 - q1) * std::log2(1.0 - q1);
        err[s] += w * tot * e;
        ent[s] += w * tot * h;
      }
    }
  }
  for (std::uint32_t s = 0; s < m; ++s) {
    stats.error_rate[s] = err[s] / wsum;
    stats.entropy[s] = ent[s] / wsum;
  }
  return stats;
}

SlicePlan plan_slices(const SliceCodec& codec, const CorrelationModel& model,
                      std::uint32_t n_symbols, double syndrome_rate_factor) {
  const SliceStats stats = predict_slice_stats(codec, model);
  SlicePlan plan;
  plan.passes = 4;
  for (std::uint32_t s = 0; s < codec.m; ++s) {
    SliceAction a;
    const double e = stats.error_rate[s];
    const double h = stats.entropy[s];
    if (e >= 0.25) {
      a.method = SliceMethod::Disclose;
    } else if (h >= 0.02) {
      a.method = SliceMethod::Syndrome;
      a.syndrome_bits = static_cast<std::uint32_t>(std::min<double>(
          n_symbols, std::ceil(syndrome_rate_factor * h * n_symbols)));
    } else {
      a.method = SliceMethod::Bisect;
      // keep the first pass a real partition: a lone whole-slice parity
      // cannot catch an even number of errors
      const double cap =
          std::max(2.0, std::min<double>(16384.0, n_symbols / 16.0));
      const double k = e > 1e-6 ? 0.73 / e : cap;
      a.k1 = static_cast<std::uint32_t>(std::clamp(k, 2.0, cap));
    }
    plan.slices.push_back(a);
  }
  return plan;
}

double measure_beta(const LeakageLedger& ledger, std::uint32_t m,
                    double i_ab_shannon) {
  if (!(i_ab_shannon > 0.0))
    throw InvalidArgument("measure_beta: i_ab must be positive");
  if (ledger.n_symbols == 0)
    throw InvalidArgument("measure_beta: empty ledger");
  const double per_symbol = static_cast<double>(ledger.disclosed_bits) /
                            static_cast<double>(ledger.n_symbols);
  const double retained = std::max(0.0, static_cast<double>(m) - per_symbol);
  return retained / i_ab_shannon;
}

// ---------------------------------------------------------------------------
// Bob: reference side.

namespace {

class BisectServer {
 public:
  BisectServer(std::span<const std::uint8_t> bits, std::uint8_t slice,
               std::uint32_t passes, std::uint32_t k1,
               std::uint8_t first_pass, Rng& seeder, ReconTransport& t,
               LeakageLedger& ledger)
      : bits_(bits), slice_(slice), transport_(t), ledger_(ledger) {
    const auto n = static_cast<std::uint32_t>(bits.size());
    for (std::uint32_t p = 0; p < passes; ++p) {
      const std::uint8_t pass_id = static_cast<std::uint8_t>(first_pass + p);
      const std::uint32_t k =
          std::min<std::uint64_t>(static_cast<std::uint64_t>(k1) << p, n);
      const std::uint64_t seed = seeder.next_u64();
      transport_.send(make_shuffle_seed(slice_, pass_id, seed));
      perms_.push_back(make_permutation(n, seed, p == 0 && first_pass == 0));
      pass_ids_.push_back(pass_id);

      const std::uint32_t nblocks = (n + k - 1) / k;
      std::vector<std::uint8_t> par(nblocks, 0);
      const auto& perm = perms_.back();
      for (std::uint32_t b = 0; b < nblocks; ++b) {
        std::uint8_t acc = 0;
        const std::uint32_t lo = b * k, hi = std::min(n, lo + k);
        for (std::uint32_t i = lo; i < hi; ++i) acc ^= bits_[perm[i]];
        par[b] = acc;
      }
      transport_.send(make_parity_rsp(slice_, pass_id, par));
      ledger_.add(slice_, nblocks);
      serve_probes(pass_id);
    }
  }

 private:
  void serve_probes(std::uint8_t current_pass) {
    for (;;) {
      const ParityReqMsg req = parse_parity_req(transport_.recv());
      if (req.slice != slice_) throw Error("bisect: probe for wrong slice");
      if (req.ranges.empty()) {
        if (req.pass != current_pass)
          throw Error("bisect: pass marker out of order");
        return;
      }
      // probes may reference any pass already dealt in this phase
      std::size_t idx = pass_ids_.size();
      for (std::size_t i = 0; i < pass_ids_.size(); ++i)
        if (pass_ids_[i] == req.pass) idx = i;
      if (idx == pass_ids_.size()) throw Error("bisect: probe unknown pass");
      std::vector<std::uint8_t> answer;
      answer.reserve(req.ranges.size());
      const auto& perm = perms_[idx];
      for (auto [start, len] : req.ranges) {
        if (start + len > bits_.size()) throw Error("bisect: probe range");
        std::uint8_t acc = 0;
        for (std::uint32_t i = start; i < start + len; ++i)
          acc ^= bits_[perm[i]];
        answer.push_back(acc);
      }
      transport_.send(make_parity_rsp(slice_, req.pass, answer));
      ledger_.add(slice_, answer.size());
    }
  }

  std::span<const std::uint8_t> bits_;
  std::uint8_t slice_;
  ReconTransport& transport_;
  LeakageLedger& ledger_;
  std::vector<std::vector<std::uint32_t>> perms_;
  std::vector<std::uint8_t> pass_ids_;
};

}  // namespace

ReconResult reconcile_bob(std::span<const double> bob_values,
                          const SliceCodec& codec, const SlicePlan& plan,
                          std::uint64_t shuffle_seed_base,
                          ReconTransport& transport) {
  const auto n = static_cast<std::uint32_t>(bob_values.size());
  const std::uint32_t m = codec.m;
  if (plan.slices.size() != m) throw InvalidArgument("plan/codec mismatch");

  ReconResult result;
  result.bits.assign(static_cast<std::size_t>(n) * m, 0);
  result.ledger.per_slice.assign(m + 1, 0);
  result.ledger.n_symbols = n;

  std::vector<std::uint32_t> cell(n);
  for (std::uint32_t i = 0; i < n; ++i) cell[i] = codec.cell_of(bob_values[i]);
  for (std::uint32_t s = 0; s < m; ++s)
    for (std::uint32_t i = 0; i < n; ++i)
      result.bits[static_cast<std::size_t>(s) * n + i] =
          static_cast<std::uint8_t>(codec.bit(cell[i], s));

  Rng seeder(derive_seed(shuffle_seed_base, 0x5ec0));

  for (std::uint32_t s = 0; s < m; ++s) {
    const SliceAction& action = plan.slices[s];
    std::span<const std::uint8_t> slice_bits(
        result.bits.data() + static_cast<std::size_t>(s) * n, n);
    switch (action.method) {
      case SliceMethod::Disclose: {
        transport.send(make_parity_rsp(static_cast<std::uint8_t>(s), 0,
                                       slice_bits));
        result.ledger.add(s, n);
        const ParityReqMsg ack = parse_parity_req(transport.recv());
        if (ack.slice != s || !ack.ranges.empty())
          throw Error("reconcile_bob: bad disclosure ack");
        break;
      }
      case SliceMethod::Syndrome: {
        const std::uint64_t graph_seed = seeder.next_u64();
        transport.send(
            make_shuffle_seed(static_cast<std::uint8_t>(s), 0, graph_seed));
        const ParityGraph graph =
            ParityGraph::build(n, action.syndrome_bits, graph_seed);
        const auto syn = graph.syndrome(slice_bits);
        transport.send(
            make_parity_rsp(static_cast<std::uint8_t>(s), 0, syn));
        result.ledger.add(s, syn.size());
        // Alice requests cleanup bisection with her preferred block size.
        const ParityReqMsg req = parse_parity_req(transport.recv());
        if (req.slice != s || req.pass != kCleanupPass || req.ranges.size() != 1)
          throw Error("reconcile_bob: expected cleanup request");
        const std::uint32_t k1 = std::clamp<std::uint32_t>(
            req.ranges[0].first, 2, std::max<std::uint32_t>(2, n));
        BisectServer(slice_bits, static_cast<std::uint8_t>(s), plan.passes,
                     k1, 1, seeder, transport, result.ledger);
        break;
      }
      case SliceMethod::Bisect: {
        BisectServer(slice_bits, static_cast<std::uint8_t>(s), plan.passes,
                     std::min(action.k1, n), 0, seeder, transport,
                     result.ledger);
        break;
      }
    }
  }

  result.key_hash = [&] {
    const Bytes packed = canonical_packed(result.bits);
    return hash64(packed.data(), packed.size());
  }();
  transport.send(make_verify(0, result.key_hash, 1));
  const ReconMsg rsp = transport.recv();
  if (rsp.kind != ReconMsgKind::VerifyHash)
    throw Error("reconcile_bob: expected verify response");
  std::size_t at = 0;
  get_u8(rsp.payload, at);
  get_u64(rsp.payload, at);
  result.verified = get_u8(rsp.payload, at) != 0;
  result.ledger.add(m, 65);
  return result;
}

// ---------------------------------------------------------------------------
// Alice: corrector side.

namespace {

// Parity bookkeeping for the bisection phase, with backtracking across
// passes: a repaired bit flips the parity of every containing block.
class BisectClient {
 public:
  BisectClient(std::vector<std::uint8_t>& bits, std::uint8_t slice,
               std::uint32_t passes, std::uint32_t k1,
               std::uint8_t first_pass, ReconTransport& t,
               LeakageLedger& ledger)
      : bits_(bits), slice_(slice), transport_(t), ledger_(ledger) {
    const auto n = static_cast<std::uint32_t>(bits.size());
    for (std::uint32_t p = 0; p < passes; ++p) {
      const std::uint8_t pass_id = static_cast<std::uint8_t>(first_pass + p);
      const std::uint32_t k =
          std::min<std::uint64_t>(static_cast<std::uint64_t>(k1) << p, n);
      const std::uint64_t seed =
          parse_shuffle_seed(transport_.recv(), slice_, pass_id);
      perms_.push_back(make_permutation(n, seed, p == 0 && first_pass == 0));
      invs_.emplace_back(n);
      for (std::uint32_t i = 0; i < n; ++i) invs_.back()[perms_.back()[i]] = i;
      ks_.push_back(k);
      pass_ids_.push_back(pass_id);

      const auto bob_par = parse_parity_rsp(transport_.recv(), slice_);
      ledger_.add(slice_, bob_par.size());
      bob_par_.push_back(bob_par);
      const std::uint32_t nblocks = (n + k - 1) / k;
      if (bob_par.size() != nblocks) throw Error("bisect: parity count");
      std::vector<std::uint8_t> mine(nblocks, 0);
      const auto& perm = perms_.back();
      for (std::uint32_t b = 0; b < nblocks; ++b) {
        std::uint8_t acc = 0;
        const std::uint32_t lo = b * k, hi = std::min(n, lo + k);
        for (std::uint32_t i = lo; i < hi; ++i) acc ^= bits_[perm[i]];
        mine[b] = acc;
      }
      my_par_.push_back(std::move(mine));
      const std::size_t q = my_par_.size() - 1;
      for (std::uint32_t b = 0; b < nblocks; ++b)
        if (my_par_[q][b] != bob_par_[q][b]) mismatched_.insert({q, b});

      repair_all();
      ParityReqMsg done;
      done.slice = slice_;
      done.pass = pass_id;
      transport_.send(make_parity_req(done));
    }
  }

 private:
  std::uint8_t probe(std::size_t q, std::uint32_t start, std::uint32_t len) {
    ParityReqMsg req;
    req.slice = slice_;
    req.pass = pass_ids_[q];
    req.ranges.emplace_back(start, len);
    transport_.send(make_parity_req(req));
    const auto bits = parse_parity_rsp(transport_.recv(), slice_);
    if (bits.size() != 1) throw Error("bisect: probe answer size");
    ledger_.add(slice_, 1);
    return bits[0];
  }

  void flip(std::uint32_t symbol) {
    bits_[symbol] ^= 1u;
    for (std::size_t q = 0; q < perms_.size(); ++q) {
      const std::uint32_t b = invs_[q][symbol] / ks_[q];
      my_par_[q][b] ^= 1u;
      if (my_par_[q][b] != bob_par_[q][b])
        mismatched_.insert({q, b});
      else
        mismatched_.erase({q, b});
    }
  }

  void repair_all() {
    const auto n = static_cast<std::uint32_t>(bits_.size());
    while (!mismatched_.empty()) {
      const auto [q, b] = *mismatched_.begin();
      std::uint32_t lo = b * ks_[q], hi = std::min(n, lo + ks_[q]);
      while (hi - lo > 1) {
        const std::uint32_t mid = lo + (hi - lo) / 2;
        std::uint8_t mine = 0;
        for (std::uint32_t i = lo; i < mid; ++i) mine ^= bits_[perms_[q][i]];
        const std::uint8_t bobs = probe(q, lo, mid - lo);
        if (mine != bobs)
          hi = mid;
        else
          lo = mid;
      }
      flip(perms_[q][lo]);
    }
  }

  std::vector<std::uint8_t>& bits_;
  std::uint8_t slice_;
  ReconTransport& transport_;
  LeakageLedger& ledger_;
  std::vector<std::vector<std::uint32_t>> perms_;
  std::vector<std::vector<std::uint32_t>> invs_;
  std::vector<std::uint32_t> ks_;
  std::vector<std::uint8_t> pass_ids_;
  std::vector<std::vector<std::uint8_t>> bob_par_;
  std::vector<std::vector<std::uint8_t>> my_par_;
  std::set<std::pair<std::size_t, std::uint32_t>> mismatched_;
};

}  // namespace

ReconResult reconcile_alice(std::span<const double> alice_values,
                            const SliceCodec& codec, const SlicePlan& plan,
                            const CorrelationModel& model,
                            ReconTransport& transport) {
  const auto n = static_cast<std::uint32_t>(alice_values.size());
  const std::uint32_t m = codec.m;
  const std::uint32_t cells = codec.cells();
  if (plan.slices.size() != m) throw InvalidArgument("plan/codec mismatch");
  if (!(model.sigma > 0.0))
    throw InvalidArgument("reconcile_alice: sigma must be positive");

  ReconResult result;
  result.bits.assign(static_cast<std::size_t>(n) * m, 0);
  result.ledger.per_slice.assign(m + 1, 0);
  result.ledger.n_symbols = n;

  // per-symbol cell probabilities under the correlation model
  std::vector<double> cellp(static_cast<std::size_t>(n) * cells);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double mu = model.slope * alice_values[i];
    double prev = 0.0;
    double* row = cellp.data() + static_cast<std::size_t>(i) * cells;
    for (std::uint32_t c = 0; c < cells - 1; ++c) {
      const double cdf = normal_cdf((codec.boundaries[c] - mu) / model.sigma);
      row[c] = std::max(cdf - prev, 0.0);
      prev = cdf;
    }
    row[cells - 1] = std::max(1.0 - prev, 0.0);
  }

  std::vector<std::uint32_t> lower(n, 0);

  for (std::uint32_t s = 0; s < m; ++s) {
    const SliceAction& action = plan.slices[s];
    std::vector<std::uint8_t> bits(n, 0);
    std::vector<double> prior_llr;

    auto compute_priors = [&](bool want_llr) {
      if (want_llr) prior_llr.assign(n, 0.0);
      const std::uint32_t mask = (1u << s) - 1u;
      for (std::uint32_t i = 0; i < n; ++i) {
        const double* row = cellp.data() + static_cast<std::size_t>(i) * cells;
        double w0 = 0.0, w1 = 0.0;
        for (std::uint32_t c = 0; c < cells; ++c) {
          const std::uint32_t g = SliceCodec::gray(c);
          if ((g & mask) != lower[i]) continue;
          if ((g >> s) & 1u)
            w1 += row[c];
          else
            w0 += row[c];
        }
        bits[i] = w1 > w0;
        if (want_llr) {
          const double p0 = std::max(w0, 1e-300);
          const double p1 = std::max(w1, 1e-300);
          prior_llr[i] =
              std::clamp(std::log(p0) - std::log(p1), -kLlrClamp, kLlrClamp);
        }
      }
    };

    switch (action.method) {
      case SliceMethod::Disclose: {
        bits = parse_parity_rsp(transport.recv(), static_cast<std::uint8_t>(s));
        if (bits.size() != n) throw Error("reconcile_alice: disclosure size");
        result.ledger.add(s, n);
        ParityReqMsg ack;
        ack.slice = static_cast<std::uint8_t>(s);
        transport.send(make_parity_req(ack));
        break;
      }
      case SliceMethod::Syndrome: {
        compute_priors(true);
        const std::uint64_t graph_seed =
            parse_shuffle_seed(transport.recv(), static_cast<std::uint8_t>(s), 0);
        const ParityGraph graph =
            ParityGraph::build(n, action.syndrome_bits, graph_seed);
        const auto syn = parse_parity_rsp(transport.recv(),
                                          static_cast<std::uint8_t>(s));
        result.ledger.add(s, syn.size());
        BpOutcome decoded = bp_decode(graph, prior_llr, syn);
        bits = std::move(decoded.bits);

        // Residual repair: a couple of coarse verification passes when
        // decoding converged, a real cleanup sized to the remaining
        // uncertainty when it did not.
        const double cap = std::max(2.0, std::min<double>(16384.0, n / 16.0));
        std::uint32_t k1;
        if (decoded.converged) {
          k1 = static_cast<std::uint32_t>(cap);
        } else {
          double expected_err = 0.0;
          for (std::uint32_t i = 0; i < n; ++i)
            expected_err += 1.0 / (1.0 + std::exp(std::fabs(
                                             decoded.posterior_llr[i])));
          expected_err /= n;
          const double k = expected_err > 1e-6 ? 0.73 / expected_err : cap;
          k1 = static_cast<std::uint32_t>(std::clamp(k, 2.0, cap));
        }
        ParityReqMsg cleanup;
        cleanup.slice = static_cast<std::uint8_t>(s);
        cleanup.pass = kCleanupPass;
        cleanup.ranges.emplace_back(k1, 0);
        transport.send(make_parity_req(cleanup));
        BisectClient(bits, static_cast<std::uint8_t>(s), plan.passes, k1, 1,
                     transport, result.ledger);
        break;
      }
      case SliceMethod::Bisect: {
        compute_priors(false);
        BisectClient(bits, static_cast<std::uint8_t>(s), plan.passes,
                     std::min(action.k1, n), 0, transport, result.ledger);
        break;
      }
    }

    for (std::uint32_t i = 0; i < n; ++i) {
      result.bits[static_cast<std::size_t>(s) * n + i] = bits[i];
      lower[i] |= static_cast<std::uint32_t>(bits[i]) << s;
    }
  }

  result.key_hash = [&] {
    const Bytes packed = canonical_packed(result.bits);
    return hash64(packed.data(), packed.size());
  }();
  const ReconMsg verify = transport.recv();
  if (verify.kind != ReconMsgKind::VerifyHash)
    throw Error("reconcile_alice: expected verify");
  std::size_t at = 0;
  get_u8(verify.payload, at);
  const std::uint64_t bob_hash = get_u64(verify.payload, at);
  result.verified = bob_hash == result.key_hash;
  transport.send(make_verify(1, result.key_hash,
                             result.verified ? 1 : 0));
  result.ledger.add(m, 65);
  return result;
}

BlockReconciliation reconcile_block(std::span<const double> alice_values,
                                    std::span<const double> bob_values,
                                    const SliceCodec& codec,
                                    const SlicePlan& plan,
                                    const CorrelationModel& model,
                                    std::uint64_t shuffle_seed_base) {
  if (alice_values.size() != bob_values.size())
    throw InvalidArgument("reconcile_block: length mismatch");

  struct Queue {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<ReconMsg> q;
    void push(const ReconMsg& m) {
      {
        std::lock_guard lk(mu);
        q.push_back(m);
      }
      cv.notify_one();
    }
    ReconMsg pop() {
      std::unique_lock lk(mu);
      cv.wait(lk, [&] { return !q.empty(); });
      ReconMsg m = std::move(q.front());
      q.pop_front();
      return m;
    }
  };

  Queue to_alice, to_bob;
  ReconTransport bob_t{[&](const ReconMsg& m) { to_alice.push(m); },
                       [&] { return to_bob.pop(); }};
  ReconTransport alice_t{[&](const ReconMsg& m) { to_bob.push(m); },
                         [&] { return to_alice.pop(); }};

  BlockReconciliation out;
  std::exception_ptr bob_error;
  std::thread bob([&] {
    try {
      out.bob = reconcile_bob(bob_values, codec, plan, shuffle_seed_base,
                              bob_t);
    } catch (...) {
      bob_error = std::current_exception();
    }
  });
  out.alice = reconcile_alice(alice_values, codec, plan, model, alice_t);
  bob.join();
  if (bob_error) std::rethrow_exception(bob_error);
  out.ok = out.alice.verified && out.bob.verified;
  return out;
}

}  // namespace cvqkd
