#ifndef CVQKD_SESSION_HPP
#define CVQKD_SESSION_HPP

#include <optional>
#include <string>
#include <vector>

#include "cvqkd/channel.hpp"
#include "cvqkd/core.hpp"
#include "cvqkd/estimation.hpp"
#include "cvqkd/link.hpp"
#include "cvqkd/privacy.hpp"
#include "cvqkd/rates.hpp"
#include "cvqkd/receiver.hpp"
#include "cvqkd/reconciliation.hpp"

namespace cvqkd {

enum class SessionPhase : std::uint8_t {
  Calibrate = 0,
  Sync = 1,
  Exchange = 2,
  Estimate = 3,
  Reconcile = 4,
  Amplify = 5,
  Confirm = 6,
  Done = 7,
  Aborted = 8,
};

enum class AbortReason : std::uint8_t {
  None = 0,
  ConfigMismatch = 1,
  SyncFailure = 2,
  TamperDetected = 3,
  NoPositiveRate = 4,
  ReconcileFailed = 5,
  LinkError = 6,
  ProtocolViolation = 7,
};

const char* abort_reason_name(AbortReason r);
const char* session_phase_name(SessionPhase p);

struct BlockResult {
  std::uint32_t block_id = 0;
  std::uint32_t sync_offset = 0;
  double theta = 0.0;
  ChannelEstimate est_test;
  ChannelEstimate est_revealed;
  ChannelEstimate est;  // pooled, drives rates and the go/no-go decision
  RateReport rates;
  std::uint32_t n_kept = 0;
  std::uint32_t m_slices = 0;
  LeakageLedger ledger;
  double beta_measured = 0.0;
  std::uint64_t secret_bits = 0;
  bool discarded = false;  // reconciliation verification failed
  SecretKey key;           // empty when discarded
};

struct SessionOutcome {
  SessionPhase final_phase = SessionPhase::Aborted;
  AbortReason abort_reason = AbortReason::None;
  std::vector<BlockResult> blocks;
  std::vector<SessionPhase> alice_phases;
  std::vector<SessionPhase> bob_phases;
  Transcript alice_transcript;
  Transcript bob_transcript;
  std::vector<SecretKey> alice_keys;  // one per completed block
  std::vector<SecretKey> bob_keys;
  CalibrationResult calibration;
  std::uint64_t pulses_processed = 0;

  bool done() const { return final_phase == SessionPhase::Done; }
  std::uint64_t total_secret_bits() const {
    std::uint64_t n = 0;
    for (const auto& k : bob_keys) n += k.length;
    return n;
  }
};

struct SessionOptions {
  AttackModel attack;
  bool record_transcripts = true;
  bool use_sockets = false;  // loopback TCP instead of in-process pipes
  // When set, the second endpoint runs from this configuration instead of
  // a copy of the first; used to exercise the config handshake.
  std::optional<SessionConfig> bob_config;
};

/// Runs a full two-endpoint session: Alice, Bob and the channel
/// interposer execute concurrently and exchange every bit over the two
/// links. Returns the merged outcome.
SessionOutcome run_session(const SessionConfig& cfg,
                           const SessionOptions& opts = {});

/// Deterministic sync padding prepended to each block's pulse stream;
/// both the emitter and test harnesses derive it from the session seed.
std::uint32_t sync_pad_for_block(const SessionConfig& cfg,
                                 std::uint32_t block_id);

}  // namespace cvqkd

#endif
