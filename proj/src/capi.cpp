#include "cvqkd.h"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>

#include "cvqkd/channel.hpp"
#include "cvqkd/core.hpp"
#include "cvqkd/emitter.hpp"
#include "cvqkd/privacy.hpp"
#include "cvqkd/rates.hpp"
#include "cvqkd/receiver.hpp"
#include "cvqkd/reconciliation.hpp"
#include "cvqkd/session.hpp"

using namespace cvqkd;

struct cvqkd_config {
  SessionConfig cfg;
  std::string text_cache;
};

struct cvqkd_session_result {
  SessionOutcome outcome;
  std::vector<std::uint8_t> alice_key_bytes;
  std::uint64_t alice_key_bits = 0;
  std::vector<std::uint8_t> bob_key_bytes;
  std::uint64_t bob_key_bits = 0;
  std::vector<std::uint8_t> alice_transcript;
  std::vector<std::uint8_t> bob_transcript;
  std::string report_text;
};

namespace {

cvqkd_status guard(const std::function<void()>& body) {
  try {
    body();
    return CVQKD_OK;
  } catch (const InvalidArgument&) {
    return CVQKD_ERR_INVALID_ARGUMENT;
  } catch (const Error&) {
    return CVQKD_ERR_PARSE;
  } catch (const std::exception&) {
    return CVQKD_ERR_INTERNAL;
  }
}

cvqkd_status map_abort(AbortReason r) {
  switch (r) {
    case AbortReason::None: return CVQKD_OK;
    case AbortReason::ConfigMismatch: return CVQKD_ERR_CONFIG_MISMATCH;
    case AbortReason::SyncFailure: return CVQKD_ERR_SYNC;
    case AbortReason::TamperDetected: return CVQKD_ERR_TAMPER_DETECTED;
    case AbortReason::NoPositiveRate: return CVQKD_ERR_NO_POSITIVE_RATE;
    case AbortReason::ReconcileFailed: return CVQKD_ERR_RECONCILE;
    case AbortReason::LinkError: return CVQKD_ERR_LINK;
    case AbortReason::ProtocolViolation: return CVQKD_ERR_INTERNAL;
  }
  return CVQKD_ERR_INTERNAL;
}

void concat_keys(const std::vector<SecretKey>& keys,
                 std::vector<std::uint8_t>& bytes, std::uint64_t& bits) {
  bits = 0;
  for (const SecretKey& k : keys) bits += k.length;
  bytes.assign((bits + 7) / 8, 0);
  std::uint64_t at = 0;
  for (const SecretKey& k : keys)
    for (std::uint64_t i = 0; i < k.length; ++i, ++at)
      if (k.bit(i)) bytes[at / 8] |= static_cast<std::uint8_t>(1u << (at % 8));
}

}  // namespace

extern "C" {

const char* cvqkd_status_str(cvqkd_status s) {
  switch (s) {
    case CVQKD_OK: return "ok";
    case CVQKD_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CVQKD_ERR_PARSE: return "parse error";
    case CVQKD_ERR_IO: return "io error";
    case CVQKD_ERR_NO_POSITIVE_RATE: return "no positive secret rate";
    case CVQKD_ERR_TAMPER_DETECTED: return "tamper detected";
    case CVQKD_ERR_LINK: return "link error";
    case CVQKD_ERR_SYNC: return "synchronization failure";
    case CVQKD_ERR_RECONCILE: return "reconciliation failure";
    case CVQKD_ERR_CONFIG_MISMATCH: return "config mismatch";
    case CVQKD_ERR_INTERNAL: return "internal error";
  }
  return "?";
}

const char* cvqkd_version(void) { return "0.1.0"; }

cvqkd_config* cvqkd_config_new(void) { return new cvqkd_config{}; }

void cvqkd_config_free(cvqkd_config* cfg) { delete cfg; }

cvqkd_status cvqkd_config_set(cvqkd_config* cfg, const char* key,
                              const char* value) {
  if (!cfg || !key || !value) return CVQKD_ERR_INVALID_ARGUMENT;
  return guard([&] {
    // route through the parser so key validation stays in one place
    std::string line = cfg->cfg.serialize();
    line += std::string(key) + " = " + value + "\n";
    cfg->cfg = SessionConfig::parse(line);
  });
}

cvqkd_status cvqkd_config_load_file(cvqkd_config* cfg, const char* path) {
  if (!cfg || !path) return CVQKD_ERR_INVALID_ARGUMENT;
  return guard([&] { cfg->cfg = SessionConfig::load_file(path); });
}

cvqkd_status cvqkd_config_save_file(const cvqkd_config* cfg,
                                    const char* path) {
  if (!cfg || !path) return CVQKD_ERR_INVALID_ARGUMENT;
  return guard([&] { cfg->cfg.save_file(path); });
}

const char* cvqkd_config_text(cvqkd_config* cfg) {
  if (!cfg) return nullptr;
  cfg->text_cache = cfg->cfg.serialize();
  return cfg->text_cache.c_str();
}

cvqkd_status cvqkd_rates(const cvqkd_rate_params* p, cvqkd_rate_report* out) {
  if (!p || !out) return CVQKD_ERR_INVALID_ARGUMENT;
  return guard([&] {
    RatePoint point;
    point.va = p->va;
    point.gain = p->gain;
    point.xi = p->xi;
    point.eta = p->eta;
    point.v_el = p->v_el;
    point.beta = p->beta;
    point.mode = p->paranoid ? SecurityMode::Paranoid : SecurityMode::Realistic;
    const RateReport r = evaluate_point(point);
    out->i_ab = r.i_ab;
    out->i_be_max = r.i_be_max;
    out->delta_i = r.delta_i;
    out->delta_i_eff = r.delta_i_eff;
    out->secret_rate = r.secret_rate;
  });
}

cvqkd_status cvqkd_margined_xi(double xi, double gain, double eta,
                               double margin_output, double* out) {
  if (!out) return CVQKD_ERR_INVALID_ARGUMENT;
  return guard([&] { *out = apply_output_margin(xi, gain, eta, margin_output); });
}

cvqkd_status cvqkd_gain_from_distance(double km, double attenuation_db_km,
                                      double* out) {
  if (!out) return CVQKD_ERR_INVALID_ARGUMENT;
  return guard([&] { *out = gain_from_distance(km, attenuation_db_km); });
}

cvqkd_status cvqkd_distance_from_gain(double gain, double attenuation_db_km,
                                      double* out) {
  if (!out) return CVQKD_ERR_INVALID_ARGUMENT;
  return guard([&] { *out = distance_from_gain(gain, attenuation_db_km); });
}

cvqkd_status cvqkd_optimize_va(double gain, double xi_at_40, double eta,
                               double beta, double va_lo, double va_hi,
                               double margin_output, double* va_out,
                               double* rate_out) {
  if (!va_out || !rate_out) return CVQKD_ERR_INVALID_ARGUMENT;
  return guard([&] {
    const VaOptimum opt =
        optimize_va(gain, xi_at_40, eta, beta, va_lo, va_hi, margin_output);
    *va_out = opt.va;
    *rate_out = opt.rate;
  });
}

cvqkd_status cvqkd_max_distance(const cvqkd_distance_query* q, double* km_out,
                                int* at_cap_out) {
  if (!q || !km_out || !at_cap_out) return CVQKD_ERR_INVALID_ARGUMENT;
  return guard([&] {
    MaxDistanceQuery query;
    query.va = q->va;
    query.xi_at_40 = q->xi_at_40;
    query.eta = q->eta;
    query.v_el = q->v_el;
    query.beta = q->beta;
    query.attenuation = q->attenuation;
    query.margin_output = q->margin_output;
    query.optimize = q->optimize_va != 0;
    query.va_lo = q->va_lo;
    query.va_hi = q->va_hi;
    query.cap_km = q->cap_km;
    query.mode = q->paranoid ? SecurityMode::Paranoid : SecurityMode::Realistic;
    const DistanceLimit lim = max_distance(query);
    *km_out = lim.km;
    *at_cap_out = lim.at_cap ? 1 : 0;
  });
}

cvqkd_status cvqkd_session_run(const cvqkd_config* cfg, cvqkd_attack attack,
                               double attack_fraction,
                               cvqkd_session_result** out) {
  if (!cfg || !out) return CVQKD_ERR_INVALID_ARGUMENT;
  return guard([&] {
    SessionOptions opts;
    if (attack == CVQKD_ATTACK_INTERCEPT_RESEND) {
      opts.attack.variant = AttackVariant::InterceptResend;
      opts.attack.fraction = attack_fraction;
    }
    auto* r = new cvqkd_session_result{};
    r->outcome = run_session(cfg->cfg, opts);
    concat_keys(r->outcome.alice_keys, r->alice_key_bytes, r->alice_key_bits);
    concat_keys(r->outcome.bob_keys, r->bob_key_bytes, r->bob_key_bits);
    r->alice_transcript = r->outcome.alice_transcript.serialize();
    r->bob_transcript = r->outcome.bob_transcript.serialize();

    std::ostringstream report;
    for (const BlockResult& b : r->outcome.blocks) {
      report << "block " << b.block_id << ": offset=" << b.sync_offset
             << " theta=" << b.theta << " G=" << b.est.gain
             << " xi=" << b.est.xi << " xi_secure=" << b.est.xi_secure
             << " i_ab=" << b.rates.i_ab << " i_be=" << b.rates.i_be_max
             << " beta=" << b.beta_measured << " l=" << b.secret_bits
             << (b.discarded ? " discarded" : "") << "\n";
    }
    report << "outcome: "
           << (r->outcome.done()
                   ? "done"
                   : std::string("aborted(") +
                         abort_reason_name(r->outcome.abort_reason) + ")")
           << "\n";
    r->report_text = report.str();
    *out = r;
  });
}

void cvqkd_session_result_free(cvqkd_session_result* r) { delete r; }

cvqkd_status cvqkd_session_outcome(const cvqkd_session_result* r) {
  if (!r) return CVQKD_ERR_INVALID_ARGUMENT;
  if (r->outcome.done()) return CVQKD_OK;
  return map_abort(r->outcome.abort_reason);
}

uint32_t cvqkd_session_block_count(const cvqkd_session_result* r) {
  return r ? static_cast<uint32_t>(r->outcome.blocks.size()) : 0;
}

cvqkd_status cvqkd_session_block(const cvqkd_session_result* r, uint32_t index,
                                 cvqkd_block_report* out) {
  if (!r || !out || index >= r->outcome.blocks.size())
    return CVQKD_ERR_INVALID_ARGUMENT;
  const BlockResult& b = r->outcome.blocks[index];
  out->block_id = b.block_id;
  out->sync_offset = b.sync_offset;
  out->theta = b.theta;
  out->gain_hat = b.est.gain;
  out->xi_hat = b.est.xi;
  out->xi_secure = b.est.xi_secure;
  out->i_ab = b.rates.i_ab;
  out->i_be_max = b.rates.i_be_max;
  out->delta_i_eff = b.rates.delta_i_eff;
  out->beta_measured = b.beta_measured;
  out->n_kept = b.n_kept;
  out->m_slices = b.m_slices;
  out->disclosed_bits = b.ledger.disclosed_bits;
  out->secret_bits = b.secret_bits;
  out->discarded = b.discarded ? 1 : 0;
  return CVQKD_OK;
}

cvqkd_status cvqkd_session_key(const cvqkd_session_result* r, int endpoint,
                               const uint8_t** bytes, uint64_t* len_bits) {
  if (!r || !bytes || !len_bits || endpoint < 0 || endpoint > 1)
    return CVQKD_ERR_INVALID_ARGUMENT;
  const auto& buf = endpoint == 0 ? r->alice_key_bytes : r->bob_key_bytes;
  *bytes = buf.data();
  *len_bits = endpoint == 0 ? r->alice_key_bits : r->bob_key_bits;
  return CVQKD_OK;
}

cvqkd_status cvqkd_session_transcript(const cvqkd_session_result* r,
                                      int endpoint, const uint8_t** bytes,
                                      size_t* len) {
  if (!r || !bytes || !len || endpoint < 0 || endpoint > 1)
    return CVQKD_ERR_INVALID_ARGUMENT;
  const auto& buf = endpoint == 0 ? r->alice_transcript : r->bob_transcript;
  *bytes = buf.data();
  *len = buf.size();
  return CVQKD_OK;
}

const char* cvqkd_session_report_text(cvqkd_session_result* r) {
  return r ? r->report_text.c_str() : nullptr;
}

cvqkd_status cvqkd_transcript_render(const uint8_t* bytes, size_t len,
                                     char** out) {
  if (!bytes || !out) return CVQKD_ERR_INVALID_ARGUMENT;
  return guard([&] {
    const Transcript t =
        Transcript::deserialize(std::vector<std::uint8_t>(bytes, bytes + len));
    const std::string text = t.render();
    *out = static_cast<char*>(std::malloc(text.size() + 1));
    std::memcpy(*out, text.c_str(), text.size() + 1);
  });
}

void cvqkd_string_free(char* s) { std::free(s); }

cvqkd_status cvqkd_bench_pipeline(uint64_t n_pulses, double* symbols_per_sec) {
  if (!symbols_per_sec) return CVQKD_ERR_INVALID_ARGUMENT;
  if (n_pulses == 0) {
    *symbols_per_sec = 0.0;
    return CVQKD_OK;
  }
  return guard([&] {
    SessionConfig cfg;
    cfg.rng_seed = 7;
    Emitter emitter(cfg, derive_seed(cfg.rng_seed, 1));
    ChannelModel channel(cfg, {}, derive_seed(cfg.rng_seed, 3));
    Receiver receiver(cfg.detector, derive_seed(cfg.rng_seed, 2));
    double sink = 0.0;
    std::uint64_t produced = 0;
    const auto t0 = std::chrono::steady_clock::now();
    while (produced < n_pulses) {
      for (auto& [sym, pulse] : emitter.emit_frame()) {
        const Measurement m = receiver.measure(channel.propagate(pulse), produced);
        sink += m.value;
        ++produced;
        (void)sym;
      }
    }
    const auto t1 = std::chrono::steady_clock::now();
    const double dt = std::chrono::duration<double>(t1 - t0).count();
    *symbols_per_sec = static_cast<double>(produced) / dt;
    if (!std::isfinite(sink)) *symbols_per_sec = 0.0;
  });
}

cvqkd_status cvqkd_bench_reconciliation(uint32_t n_symbols,
                                        double* symbols_per_sec,
                                        double* beta_out) {
  if (!symbols_per_sec || !beta_out) return CVQKD_ERR_INVALID_ARGUMENT;
  if (n_symbols == 0) {
    *symbols_per_sec = 0.0;
    *beta_out = 0.0;
    return CVQKD_OK;
  }
  return guard([&] {
    // reference operating point
    const double eta = 0.6, gain = 1.0, xi = 0.06, v_el = 0.01, va = 40.0;
    Rng rng(20240817);
    const double slope = std::sqrt(eta * gain);
    const double sigma = std::sqrt(1.0 + eta * gain * xi + v_el);
    std::vector<double> alice(n_symbols), bob(n_symbols);
    for (uint32_t i = 0; i < n_symbols; ++i) {
      alice[i] = std::sqrt(va) * rng.gaussian();
      bob[i] = slope * alice[i] + sigma * rng.gaussian();
    }
    double vb = 0.0;
    for (double v : bob) vb += v * v;
    vb /= n_symbols;
    const double iab = i_ab(va, gain, xi, eta);
    const SliceCodec codec = SliceCodec::design(vb, choose_slice_count(iab));
    const CorrelationModel model{slope, sigma};
    const SlicePlan plan = plan_slices(codec, model, n_symbols);
    const auto t0 = std::chrono::steady_clock::now();
    const BlockReconciliation rec =
        reconcile_block(alice, bob, codec, plan, model, 99);
    const auto t1 = std::chrono::steady_clock::now();
    if (!rec.ok) throw Error("benchmark reconciliation failed");
    const double dt = std::chrono::duration<double>(t1 - t0).count();
    *symbols_per_sec = n_symbols / dt;
    *beta_out = measure_beta(rec.bob.ledger, codec.m, iab);
  });
}

}  // extern "C"
