#include "cvqkd/session.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "cvqkd/emitter.hpp"
#include "cvqkd/framing.hpp"
#include "cvqkd/receiver.hpp"
#include "cvqkd/rng.hpp"

namespace cvqkd {

namespace {

constexpr std::uint32_t kPulsesPerBatch = 1000;
constexpr std::uint64_t kCalibrationPulses = 100000;

// seed stream tags
constexpr std::uint64_t kTagAlice = 1;
constexpr std::uint64_t kTagBob = 2;
constexpr std::uint64_t kTagChannel = 3;
constexpr std::uint64_t kTagRecon = 4;

struct AbortSignal {
  AbortReason reason;
  bool sent_by_peer;
};

const char* kAbortNames[] = {"none",          "config-mismatch",
                             "sync-failure",  "tamper-detected",
                             "no-positive-rate", "reconcile-failed",
                             "link-error",    "protocol-violation"};
const char* kPhaseNames[] = {"calibrate", "sync",    "exchange",
                             "estimate",  "reconcile", "amplify",
                             "confirm",   "done",    "aborted"};

WireMessage make_abort(AbortReason reason, std::uint32_t block) {
  PayloadWriter w;
  w.u32(static_cast<std::uint32_t>(reason));
  w.u32(block);
  return {MessageType::Abort, std::move(w.bytes)};
}

AbortReason parse_abort(const WireMessage& msg) {
  PayloadReader r{msg.payload};
  const std::uint32_t reason = r.u32();
  if (reason == 0 || reason > static_cast<std::uint32_t>(AbortReason::ProtocolViolation))
    return AbortReason::ProtocolViolation;
  return static_cast<AbortReason>(reason);
}

/// Shared endpoint machinery: phase trace and abort bookkeeping.
struct EndpointBase {
  MessagePort* classical = nullptr;
  std::vector<SessionPhase> phases;
  AbortReason abort_reason = AbortReason::None;
  bool done = false;

  void enter(SessionPhase p) { phases.push_back(p); }

  [[noreturn]] void abort_local(AbortReason reason, std::uint32_t block) {
    classical->send(make_abort(reason, block));
    throw AbortSignal{reason, false};
  }

  WireMessage expect(MessageType type) {
    WireMessage msg = classical->recv();
    if (msg.type == MessageType::Abort)
      throw AbortSignal{parse_abort(msg), true};
    if (msg.type != type) {
      classical->send(make_abort(AbortReason::ProtocolViolation, 0));
      throw AbortSignal{AbortReason::ProtocolViolation, false};
    }
    return msg;
  }

  // Adapter between the reconciliation protocol and the classical link.
  ReconTransport recon_transport(std::uint32_t block_id) {
    auto to_wire = [](ReconMsgKind k) {
      switch (k) {
        case ReconMsgKind::ParityReq: return MessageType::ParityReq;
        case ReconMsgKind::ParityRsp: return MessageType::ParityRsp;
        case ReconMsgKind::ShuffleSeed: return MessageType::ShuffleSeed;
        case ReconMsgKind::VerifyHash: return MessageType::VerifyHash;
      }
      throw Error("bad recon kind");
    };
    auto from_wire = [](MessageType t) {
      switch (t) {
        case MessageType::ParityReq: return ReconMsgKind::ParityReq;
        case MessageType::ParityRsp: return ReconMsgKind::ParityRsp;
        case MessageType::ShuffleSeed: return ReconMsgKind::ShuffleSeed;
        case MessageType::VerifyHash: return ReconMsgKind::VerifyHash;
        default: throw Error("unexpected message during reconciliation");
      }
    };
    ReconTransport t;
    t.send = [this, block_id, to_wire](const ReconMsg& m) {
      PayloadWriter w;
      w.u32(block_id);
      w.raw(m.payload.data(), m.payload.size());
      classical->send({to_wire(m.kind), std::move(w.bytes)});
    };
    t.recv = [this, block_id, from_wire]() {
      WireMessage msg = classical->recv();
      if (msg.type == MessageType::Abort)
        throw AbortSignal{parse_abort(msg), true};
      ReconMsg m;
      m.kind = from_wire(msg.type);
      PayloadReader r{msg.payload};
      if (r.u32() != block_id) throw Error("reconciliation: wrong block");
      m.payload.assign(msg.payload.begin() + 4, msg.payload.end());
      return m;
    };
    return t;
  }
};

std::uint32_t data_ordinal_to_block_index(const SessionConfig& cfg,
                                          std::uint32_t ordinal) {
  const std::uint32_t per_frame = cfg.data_pulses_per_frame();
  return (ordinal / per_frame) * cfg.frame_len + cfg.test_pulses_per_frame +
         ordinal % per_frame;
}

// ---------------------------------------------------------------------------

class AliceEndpoint : public EndpointBase {
 public:
  AliceEndpoint(const SessionConfig& cfg, MessagePort& classical_port,
                MessagePort& physics_out)
      : cfg_(cfg),
        physics_(physics_out),
        emitter_(cfg, derive_seed(cfg.rng_seed, kTagAlice)) {
    classical = &classical_port;
  }

  std::vector<SecretKey> keys;

  void run() {
    enter(SessionPhase::Calibrate);
    const std::string hello = cfg_.serialize();
    {
      PayloadWriter w;
      w.raw(reinterpret_cast<const std::uint8_t*>(hello.data()), hello.size());
      classical->send({MessageType::Hello, std::move(w.bytes)});
    }
    const WireMessage ack = expect(MessageType::ConfigAck);
    {
      PayloadReader r{ack.payload};
      if (r.u64() != hash64(hello.data(), hello.size()))
        abort_local(AbortReason::ConfigMismatch, 0);
    }

    for (std::uint32_t b = 0; b < cfg_.blocks; ++b) run_block(b);
    physics_.close();
    enter(SessionPhase::Done);
    done = true;
  }

 private:
  void run_block(std::uint32_t block_id) {
    enter(SessionPhase::Sync);
    const std::uint32_t pad = sync_pad_for_block(cfg_, block_id);
    const std::uint32_t total = pad + cfg_.block_len;

    std::vector<Symbol> symbols;  // intended, block-aligned
    symbols.reserve(cfg_.block_len);

    enter(SessionPhase::Exchange);
    std::vector<PulseState> batch;
    batch.reserve(kPulsesPerBatch);
    std::uint32_t sent = 0;
    auto flush = [&](bool force) {
      while (batch.size() >= kPulsesPerBatch ||
             (force && !batch.empty())) {
        const std::uint32_t count =
            std::min<std::uint32_t>(kPulsesPerBatch,
                                    static_cast<std::uint32_t>(batch.size()));
        PayloadWriter w;
        w.u32(block_id);
        w.u32(total);
        w.u32(sent);
        w.u32(count);
        for (std::uint32_t i = 0; i < count; ++i) {
          w.f64(batch[i].mean_x);
          w.f64(batch[i].mean_p);
          w.f64(batch[i].excess_var);
        }
        physics_.send({MessageType::PulseBatch, std::move(w.bytes)});
        batch.erase(batch.begin(), batch.begin() + count);
        sent += count;
      }
    };
    for (std::uint32_t i = 0; i < pad; ++i) {
      batch.push_back(emitter_.emit_pad_pulse().second);
      flush(false);
    }
    for (std::uint32_t f = 0; f < cfg_.frames_per_block(); ++f) {
      for (auto& [sym, pulse] : emitter_.emit_frame()) {
        symbols.push_back(sym);
        batch.push_back(pulse);
      }
      flush(false);
    }
    flush(true);

    // Bob reports where he found the frame structure.
    const WireMessage sync = expect(MessageType::SyncMark);
    std::vector<std::uint8_t> quad_bits;
    {
      PayloadReader r{sync.payload};
      if (r.u32() != block_id) abort_local(AbortReason::ProtocolViolation, block_id);
      const std::uint32_t offset = r.u32();
      const std::uint32_t n_used = r.u32();
      if (offset != pad || n_used != cfg_.block_len)
        abort_local(AbortReason::SyncFailure, block_id);
      quad_bits = r.raw((n_used + 7) / 8);
    }
    auto quad_of = [&](std::uint32_t i) {
      return (quad_bits[i / 8] >> (i % 8)) & 1u ? Quadrature::P : Quadrature::X;
    };

    enter(SessionPhase::Estimate);
    const WireMessage reveal_req = expect(MessageType::RevealIdx);
    std::vector<std::uint32_t> revealed;
    {
      PayloadReader r{reveal_req.payload};
      if (r.u32() != block_id) abort_local(AbortReason::ProtocolViolation, block_id);
      const std::uint32_t count = r.u32();
      revealed.reserve(count);
      for (std::uint32_t i = 0; i < count; ++i) revealed.push_back(r.u32());
    }
    {
      PayloadWriter w;
      w.u32(block_id);
      w.u32(static_cast<std::uint32_t>(revealed.size()));
      for (std::uint32_t ordinal : revealed) {
        const Symbol& s = symbols[data_ordinal_to_block_index(cfg_, ordinal)];
        w.f64(s.x);
        w.f64(s.p);
      }
      classical->send({MessageType::RevealVal, std::move(w.bytes)});
    }

    const WireMessage est_msg = expect(MessageType::ParamEst);
    double g_hat, xi_hat, theta, vb_kept;
    std::uint32_t n_kept;
    SlicePlan plan;
    {
      PayloadReader r{est_msg.payload};
      if (r.u32() != block_id) abort_local(AbortReason::ProtocolViolation, block_id);
      g_hat = r.f64();
      xi_hat = r.f64();
      r.f64();  // xi_secure: informational for Alice
      r.f64();  // se_g
      r.f64();  // se_xi
      theta = r.f64();
      vb_kept = r.f64();
      n_kept = r.u32();
      const std::uint32_t plan_len = r.u32();
      plan = SlicePlan::deserialize(r.raw(plan_len));
    }

    // Phase correction happens on Alice's record: rotate her symbols and
    // project each kept data pulse on Bob's measured quadrature.
    std::vector<std::uint8_t> is_revealed(cfg_.data_per_block(), 0);
    for (std::uint32_t ordinal : revealed) {
      if (ordinal >= is_revealed.size())
        abort_local(AbortReason::ProtocolViolation, block_id);
      is_revealed[ordinal] = 1;
    }
    std::vector<double> values;
    values.reserve(n_kept);
    for (std::uint32_t o = 0; o < cfg_.data_per_block(); ++o) {
      if (is_revealed[o]) continue;
      const std::uint32_t idx = data_ordinal_to_block_index(cfg_, o);
      const Symbol rotated = rotate_symbol(symbols[idx], theta);
      values.push_back(quad_of(idx) == Quadrature::X ? rotated.x : rotated.p);
    }
    if (values.size() != n_kept)
      abort_local(AbortReason::ProtocolViolation, block_id);

    enter(SessionPhase::Reconcile);
    const double eta = cfg_.detector.efficiency;
    CorrelationModel model;
    model.slope = std::sqrt(eta * std::max(g_hat, 1e-6));
    model.sigma = std::sqrt(1.0 + eta * std::max(g_hat, 0.0) * std::max(xi_hat, 0.0) +
                            cfg_.detector.electronic);
    const SliceCodec codec = SliceCodec::design(
        vb_kept, static_cast<std::uint32_t>(plan.slices.size()));
    ReconTransport transport = recon_transport(block_id);
    const ReconResult recon =
        reconcile_alice(values, codec, plan, model, transport);

    if (!recon.verified) return;  // block discarded on both sides

    enter(SessionPhase::Amplify);
    const WireMessage pa = expect(MessageType::PaSeed);
    SecretKey key;
    {
      PayloadReader r{pa.payload};
      if (r.u32() != block_id) abort_local(AbortReason::ProtocolViolation, block_id);
      const std::uint64_t out_len = r.u64();
      const std::uint32_t seed_bits_n = r.u32();
      const auto packed = r.raw((seed_bits_n + 7) / 8);
      std::vector<std::uint8_t> seed_bits(seed_bits_n);
      for (std::uint32_t i = 0; i < seed_bits_n; ++i)
        seed_bits[i] = (packed[i / 8] >> (i % 8)) & 1u;
      key = compress(recon.bits, seed_bits, out_len);
    }

    enter(SessionPhase::Confirm);
    {
      PayloadWriter w;
      w.u32(block_id);
      w.u8(0);
      w.u64(key_tag(key));
      classical->send({MessageType::KeyConfirm, std::move(w.bytes)});
    }
    const WireMessage confirm = expect(MessageType::KeyConfirm);
    {
      PayloadReader r{confirm.payload};
      if (r.u32() != block_id) abort_local(AbortReason::ProtocolViolation, block_id);
      r.u8();
      if (r.u64() != key_tag(key))
        abort_local(AbortReason::ReconcileFailed, block_id);
    }
    keys.push_back(std::move(key));
  }

  SessionConfig cfg_;
  MessagePort& physics_;
  Emitter emitter_;
};

// ---------------------------------------------------------------------------

class BobEndpoint : public EndpointBase {
 public:
  BobEndpoint(const SessionConfig& cfg, MessagePort& classical_port,
              MessagePort& physics_in)
      : cfg_(cfg),
        physics_(physics_in),
        receiver_(cfg.detector, derive_seed(cfg.rng_seed, kTagBob)),
        reveal_rng_(derive_seed(cfg.rng_seed, kTagRecon)) {
    classical = &classical_port;
  }

  std::vector<BlockResult> blocks;
  std::vector<SecretKey> keys;
  CalibrationResult calibration;
  std::uint64_t pulses_processed = 0;

  void run() {
    const WireMessage hello = expect(MessageType::Hello);
    const std::string theirs(hello.payload.begin(), hello.payload.end());
    if (theirs != cfg_.serialize())
      abort_local(AbortReason::ConfigMismatch, 0);
    {
      PayloadWriter w;
      w.u64(hash64(theirs.data(), theirs.size()));
      classical->send({MessageType::ConfigAck, std::move(w.bytes)});
    }

    enter(SessionPhase::Calibrate);
    calibration = receiver_.run_calibration(kCalibrationPulses);

    for (std::uint32_t b = 0; b < cfg_.blocks; ++b) run_block(b);
    enter(SessionPhase::Done);
    done = true;
  }

 private:
  std::vector<Measurement> receive_and_measure(std::uint32_t block_id) {
    std::vector<Measurement> measurements;
    std::uint32_t total = 0;
    std::uint64_t index = 0;
    do {
      const WireMessage msg = physics_.recv();
      if (msg.type != MessageType::PulseBatch)
        abort_local(AbortReason::ProtocolViolation, block_id);
      PayloadReader r{msg.payload};
      if (r.u32() != block_id) abort_local(AbortReason::ProtocolViolation, block_id);
      total = r.u32();
      r.u32();  // first index
      const std::uint32_t count = r.u32();
      for (std::uint32_t i = 0; i < count; ++i) {
        PulseState pulse;
        pulse.mean_x = r.f64();
        pulse.mean_p = r.f64();
        pulse.excess_var = r.f64();
        measurements.push_back(receiver_.measure(pulse, index++));
      }
      if (measurements.capacity() < total) measurements.reserve(total);
    } while (measurements.size() < total);
    pulses_processed += measurements.size();
    return measurements;
  }

  void run_block(std::uint32_t block_id) {
    enter(SessionPhase::Sync);
    const FramePlan plan = FramePlan::make(cfg_);
    const std::vector<Measurement> stream = receive_and_measure(block_id);

    BlockResult result;
    result.block_id = block_id;

    std::uint32_t offset = 0;
    try {
      const std::size_t window =
          std::min<std::size_t>(stream.size(), 6 * cfg_.frame_len);
      offset = detect_offset(std::span(stream).first(window), plan);
    } catch (const SyncError&) {
      abort_local(AbortReason::SyncFailure, block_id);
    }
    if (offset + cfg_.block_len > stream.size())
      abort_local(AbortReason::SyncFailure, block_id);
    result.sync_offset = offset;
    const std::span<const Measurement> aligned(stream.data() + offset,
                                               cfg_.block_len);

    const DemuxedBlock demux = demux_block(aligned, plan);
    double theta = 0.0;
    try {
      theta = recover_phase(demux.test, demux.test_symbols);
    } catch (const PhaseError&) {
      abort_local(AbortReason::SyncFailure, block_id);
    }
    result.theta = theta;

    enter(SessionPhase::Exchange);
    {
      PayloadWriter w;
      w.u32(block_id);
      w.u32(offset);
      w.u32(cfg_.block_len);
      std::vector<std::uint8_t> quad((cfg_.block_len + 7) / 8, 0);
      for (std::uint32_t i = 0; i < cfg_.block_len; ++i)
        if (aligned[i].quadrature == Quadrature::P)
          quad[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
      w.raw(quad.data(), quad.size());
      classical->send({MessageType::SyncMark, std::move(w.bytes)});
    }

    // Random revealed sample over the data slots.
    const std::uint32_t n_data = cfg_.data_per_block();
    const auto n_reveal = static_cast<std::uint32_t>(
        std::max(1.0, std::floor(cfg_.reveal_fraction * n_data)));
    std::vector<std::uint32_t> ordinals(n_data);
    for (std::uint32_t i = 0; i < n_data; ++i) ordinals[i] = i;
    for (std::uint32_t i = 0; i < n_reveal; ++i) {
      const auto j =
          i + static_cast<std::uint32_t>(reveal_rng_.below(n_data - i));
      std::swap(ordinals[i], ordinals[j]);
    }
    std::vector<std::uint32_t> revealed(ordinals.begin(),
                                        ordinals.begin() + n_reveal);
    std::sort(revealed.begin(), revealed.end());
    {
      PayloadWriter w;
      w.u32(block_id);
      w.u32(n_reveal);
      for (std::uint32_t o : revealed) w.u32(o);
      classical->send({MessageType::RevealIdx, std::move(w.bytes)});
    }
    const WireMessage reveal_val = expect(MessageType::RevealVal);
    std::vector<Symbol> revealed_symbols;
    {
      PayloadReader r{reveal_val.payload};
      if (r.u32() != block_id) abort_local(AbortReason::ProtocolViolation, block_id);
      const std::uint32_t count = r.u32();
      if (count != n_reveal) abort_local(AbortReason::ProtocolViolation, block_id);
      revealed_symbols.reserve(count);
      for (std::uint32_t i = 0; i < count; ++i) {
        Symbol s;
        s.x = r.f64();
        s.p = r.f64();
        revealed_symbols.push_back(s);
      }
    }

    enter(SessionPhase::Estimate);
    const double eta = cfg_.detector.efficiency;
    const double v_el = calibration.v_el;

    auto project = [&](const Symbol& s, Quadrature q) {
      const Symbol rot = rotate_symbol(s, theta);
      return q == Quadrature::X ? rot.x : rot.p;
    };
    std::vector<EstimationPair> test_pairs;
    test_pairs.reserve(demux.test.size());
    for (std::size_t i = 0; i < demux.test.size(); ++i)
      test_pairs.push_back({project(demux.test_symbols[i],
                                    demux.test[i].quadrature),
                            demux.test[i].value});
    std::vector<EstimationPair> revealed_pairs;
    revealed_pairs.reserve(n_reveal);
    for (std::uint32_t i = 0; i < n_reveal; ++i) {
      const Measurement& m = demux.data[revealed[i]];
      revealed_pairs.push_back({project(revealed_symbols[i], m.quadrature),
                                m.value});
    }

    result.est_test =
        estimate_channel(test_pairs, eta, v_el, cfg_.margin_output);
    result.est_revealed =
        estimate_channel(revealed_pairs, eta, v_el, cfg_.margin_output);
    if (cross_check(result.est_test, result.est_revealed)) {
      blocks.push_back(result);
      abort_local(AbortReason::TamperDetected, block_id);
    }
    std::vector<EstimationPair> pooled = test_pairs;
    pooled.insert(pooled.end(), revealed_pairs.begin(), revealed_pairs.end());
    result.est = estimate_channel(pooled, eta, v_el, cfg_.margin_output);

    RatePoint point;
    point.va = cfg_.modulation_variance;
    point.gain = std::clamp(result.est.gain, 1e-6, 1.0);
    point.xi = std::max(result.est.xi, 0.0);
    point.eta = eta;
    point.v_el = v_el;
    point.beta = cfg_.beta;
    result.rates = evaluate_point(point, cfg_.symbol_rate,
                                  static_cast<double>(cfg_.data_pulses_per_frame()) /
                                      cfg_.frame_len,
                                  cfg_.reveal_fraction);
    const double i_ab_est = result.rates.i_ab;
    const double i_be_secure =
        i_be_max(cfg_.modulation_variance, point.gain, result.est.xi_secure,
                 eta);
    result.rates.xi_used = result.est.xi_secure;
    result.rates.delta_i_eff = cfg_.beta * i_ab_est - i_be_secure;
    result.rates.delta_i = i_ab_est - i_be_secure;
    result.rates.i_be_max = i_be_secure;
    result.rates.secret_rate =
        std::max(0.0, result.rates.delta_i_eff) * cfg_.symbol_rate *
        (static_cast<double>(cfg_.data_pulses_per_frame()) / cfg_.frame_len) *
        (1.0 - cfg_.reveal_fraction);
    if (result.rates.delta_i_eff <= 0.0) {
      blocks.push_back(result);
      abort_local(AbortReason::NoPositiveRate, block_id);
    }

    // Kept data: everything not revealed.
    std::vector<std::uint8_t> is_revealed(n_data, 0);
    for (std::uint32_t o : revealed) is_revealed[o] = 1;
    std::vector<double> values;
    values.reserve(n_data - n_reveal);
    for (std::uint32_t o = 0; o < n_data; ++o)
      if (!is_revealed[o]) values.push_back(demux.data[o].value);
    const auto n_kept = static_cast<std::uint32_t>(values.size());
    result.n_kept = n_kept;

    double vb = 0.0;
    for (double v : values) vb += v * v;
    vb /= n_kept;

    const std::uint32_t m = choose_slice_count(i_ab_est);
    result.m_slices = m;
    const SliceCodec codec = SliceCodec::design(vb, m);
    CorrelationModel model;
    model.slope = std::sqrt(eta * point.gain);
    model.sigma =
        std::sqrt(1.0 + eta * point.gain * point.xi + cfg_.detector.electronic);
    const SlicePlan slice_plan = plan_slices(codec, model, n_kept);

    {
      PayloadWriter w;
      w.u32(block_id);
      w.f64(result.est.gain);
      w.f64(result.est.xi);
      w.f64(result.est.xi_secure);
      w.f64(result.est.se_gain);
      w.f64(result.est.se_xi);
      w.f64(theta);
      w.f64(vb);
      w.u32(n_kept);
      const Bytes plan_bytes = slice_plan.serialize();
      w.u32(static_cast<std::uint32_t>(plan_bytes.size()));
      w.raw(plan_bytes.data(), plan_bytes.size());
      classical->send({MessageType::ParamEst, std::move(w.bytes)});
    }

    enter(SessionPhase::Reconcile);
    ReconTransport transport = recon_transport(block_id);
    const ReconResult recon = reconcile_bob(
        values, codec, slice_plan, derive_seed(cfg_.rng_seed, kTagRecon + block_id),
        transport);
    result.ledger = recon.ledger;
    result.beta_measured = measure_beta(recon.ledger, m, i_ab_est);
    if (!recon.verified) {
      result.discarded = true;
      blocks.push_back(result);
      return;
    }

    enter(SessionPhase::Amplify);
    const std::uint64_t n_bits = static_cast<std::uint64_t>(m) * n_kept;
    const std::uint64_t ell = secret_length(n_kept, m, recon.ledger,
                                            i_be_secure, cfg_.safety_bits);
    result.secret_bits = ell;
    if (ell == 0) {
      blocks.push_back(result);
      abort_local(AbortReason::NoPositiveRate, block_id);
    }
    const std::uint64_t seed_bits_n = n_bits + ell - 1;
    std::vector<std::uint8_t> seed_bits(seed_bits_n);
    for (std::uint64_t i = 0; i < seed_bits_n; ++i)
      seed_bits[i] = reveal_rng_.coin() ? 1 : 0;
    {
      PayloadWriter w;
      w.u32(block_id);
      w.u64(ell);
      w.u32(static_cast<std::uint32_t>(seed_bits_n));
      const auto packed = pack_bit_vector(seed_bits);
      w.raw(packed.data(), packed.size());
      classical->send({MessageType::PaSeed, std::move(w.bytes)});
    }
    SecretKey key = compress(recon.bits, seed_bits, ell);

    enter(SessionPhase::Confirm);
    const WireMessage confirm = expect(MessageType::KeyConfirm);
    {
      PayloadReader r{confirm.payload};
      if (r.u32() != block_id) abort_local(AbortReason::ProtocolViolation, block_id);
      r.u8();
      const std::uint64_t their_tag = r.u64();
      PayloadWriter w;
      w.u32(block_id);
      w.u8(1);
      w.u64(key_tag(key));
      classical->send({MessageType::KeyConfirm, std::move(w.bytes)});
      if (their_tag != key_tag(key))
        abort_local(AbortReason::ReconcileFailed, block_id);
    }
    result.key = key;
    keys.push_back(std::move(key));
    blocks.push_back(std::move(result));
  }

  SessionConfig cfg_;
  MessagePort& physics_;
  Receiver receiver_;
  Rng reveal_rng_;
};

// ---------------------------------------------------------------------------

/// The eavesdropper's seat: decodes pulse batches, runs them through the
/// channel model (loss, excess noise, drift, attack), re-encodes.
class Middlebox {
 public:
  Middlebox(const SessionConfig& cfg, const AttackModel& attack,
            MessagePort& from_alice, MessagePort& to_bob)
      : channel_(cfg, attack, derive_seed(cfg.rng_seed, kTagChannel)),
        in_(from_alice),
        out_(to_bob) {}

  void run() {
    try {
      for (;;) {
        const WireMessage msg = in_.recv();
        if (msg.type != MessageType::PulseBatch) {
          out_.send(msg);
          continue;
        }
        PayloadReader r{msg.payload};
        const std::uint32_t block = r.u32();
        const std::uint32_t total = r.u32();
        const std::uint32_t first = r.u32();
        const std::uint32_t count = r.u32();
        PayloadWriter w;
        w.u32(block);
        w.u32(total);
        w.u32(first);
        w.u32(count);
        for (std::uint32_t i = 0; i < count; ++i) {
          PulseState pulse;
          pulse.mean_x = r.f64();
          pulse.mean_p = r.f64();
          pulse.excess_var = r.f64();
          const PulseState out = channel_.propagate(pulse);
          w.f64(out.mean_x);
          w.f64(out.mean_p);
          w.f64(out.excess_var);
        }
        out_.send({MessageType::PulseBatch, std::move(w.bytes)});
      }
    } catch (const LinkClosed&) {
      out_.close();
    }
  }

  ChannelModel channel_;

 private:
  MessagePort& in_;
  MessagePort& out_;
};

}  // namespace

const char* abort_reason_name(AbortReason r) {
  return kAbortNames[static_cast<std::size_t>(r)];
}
const char* session_phase_name(SessionPhase p) {
  return kPhaseNames[static_cast<std::size_t>(p)];
}

std::uint32_t sync_pad_for_block(const SessionConfig& cfg,
                                 std::uint32_t block_id) {
  return static_cast<std::uint32_t>(
      derive_seed(cfg.rng_seed, 0xA110C000ULL + block_id) % cfg.frame_len);
}

SessionOutcome run_session(const SessionConfig& cfg,
                           const SessionOptions& opts) {
  cfg.validate();
  const SessionConfig bob_cfg = opts.bob_config ? *opts.bob_config : cfg;

  Duplex alice_classical, bob_classical;
  Duplex alice_phys, mid_in, mid_out, bob_phys;
  if (opts.use_sockets) {
    auto [a, b] = make_socket_pair();
    alice_classical = a;
    bob_classical = b;
    auto [c, d] = make_socket_pair();
    alice_phys = c;
    mid_in = d;
    auto [e, f] = make_socket_pair();
    mid_out = e;
    bob_phys = f;
  } else {
    PipePair classical = make_pipe_pair();
    alice_classical = classical.a;
    bob_classical = classical.b;
    PipePair phys1 = make_pipe_pair();
    alice_phys = phys1.a;
    mid_in = phys1.b;
    PipePair phys2 = make_pipe_pair();
    mid_out = phys2.a;
    bob_phys = phys2.b;
  }

  SessionOutcome outcome;
  Transcript* alice_log = opts.record_transcripts ? &outcome.alice_transcript : nullptr;
  Transcript* bob_log = opts.record_transcripts ? &outcome.bob_transcript : nullptr;

  MessagePort alice_cport(alice_classical, LinkId::Classical, alice_log);
  MessagePort alice_pport(alice_phys, LinkId::Physics, alice_log);
  MessagePort bob_cport(bob_classical, LinkId::Classical, bob_log);
  MessagePort bob_pport(bob_phys, LinkId::Physics, bob_log);
  MessagePort mid_in_port(mid_in, LinkId::Physics, nullptr);
  MessagePort mid_out_port(mid_out, LinkId::Physics, nullptr);

  AliceEndpoint alice(cfg, alice_cport, alice_pport);
  BobEndpoint bob(bob_cfg, bob_cport, bob_pport);
  Middlebox mid(cfg, opts.attack, mid_in_port, mid_out_port);

  auto endpoint_runner = [](auto& ep, auto body) {
    try {
      body();
    } catch (const AbortSignal& sig) {
      ep.abort_reason = sig.reason;
      ep.enter(SessionPhase::Aborted);
    } catch (const LinkClosed&) {
      ep.abort_reason = AbortReason::LinkError;
      ep.enter(SessionPhase::Aborted);
    } catch (const std::exception&) {
      ep.abort_reason = AbortReason::ProtocolViolation;
      ep.enter(SessionPhase::Aborted);
    }
  };

  std::thread alice_thread([&] { endpoint_runner(alice, [&] { alice.run(); }); });
  std::thread mid_thread([&] { mid.run(); });
  std::thread bob_thread([&] {
    endpoint_runner(bob, [&] {
      bob.run();
      bob.classical->close();
    });
  });

  alice_thread.join();
  // Closing Alice's ports unblocks the middlebox (which closes Bob's
  // physics side in turn) and any Bob stuck in a classical recv.
  alice_pport.close();
  alice_cport.close();
  bob_thread.join();
  mid_thread.join();

  outcome.blocks = std::move(bob.blocks);
  outcome.alice_phases = std::move(alice.phases);
  outcome.bob_phases = std::move(bob.phases);
  outcome.alice_keys = std::move(alice.keys);
  outcome.bob_keys = std::move(bob.keys);
  outcome.calibration = bob.calibration;
  outcome.pulses_processed = bob.pulses_processed;

  if (alice.done && bob.done) {
    outcome.final_phase = SessionPhase::Done;
  } else {
    outcome.final_phase = SessionPhase::Aborted;
    // prefer a substantive reason over a secondary link teardown
    auto rank = [](AbortReason r) {
      if (r == AbortReason::None) return 0;
      if (r == AbortReason::LinkError) return 1;
      return 2;
    };
    outcome.abort_reason = rank(bob.abort_reason) >= rank(alice.abort_reason)
                               ? bob.abort_reason
                               : alice.abort_reason;
  }
  return outcome;
}

}  // namespace cvqkd
