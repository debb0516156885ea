#ifndef CVQKD_CORE_HPP
#define CVQKD_CORE_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cvqkd {

// All variances in this codebase are expressed in shot-noise units: an
// ideal vacuum quadrature measurement has variance exactly 1.0.
inline constexpr double kVacuumVariance = 1.0;

// Modulation variance at which the noise budget reference values are
// quoted; budget terms scale linearly with V_A relative to this point.
inline constexpr double kReferenceVa = 40.0;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

/// Quantum channel: intensity gain and input-referred excess noise.
struct ChannelParams {
  double gain = 1.0;    // in (0, 1]
  double excess = 0.0;  // xi, shot-noise units, referred to channel input

  void validate() const {
    if (!(gain > 0.0) || gain > 1.0)
      throw InvalidArgument("channel gain must be in (0, 1]");
    if (!(excess >= 0.0))
      throw InvalidArgument("channel excess noise must be >= 0");
  }
};

/// Homodyne detector: efficiency and output-referred electronic noise.
struct DetectorParams {
  double efficiency = 0.6;   // eta, in (0, 1]
  double electronic = 0.01;  // v_el at detector output, shot-noise units

  void validate() const {
    if (!(efficiency > 0.0) || efficiency > 1.0)
      throw InvalidArgument("detector efficiency must be in (0, 1]");
    if (!(electronic >= 0.0))
      throw InvalidArgument("electronic noise must be >= 0");
  }
};

/// Alice's intended quadrature displacement for one pulse, in sqrt(V0).
struct Symbol {
  double x = 0.0;
  double p = 0.0;
};

enum class PulseKind : std::uint8_t { Test = 0, Data = 1 };

/// One optical pulse in flight: mean quadratures plus the excess noise
/// variance accumulated above vacuum, referred to the point the pulse has
/// reached. The vacuum unit itself is never stored; the receiver adds it
/// exactly once at measurement.
struct PulseState {
  double mean_x = 0.0;
  double mean_p = 0.0;
  double excess_var = 0.0;
  PulseKind kind = PulseKind::Data;
};

/// Every knob of one QKD session. Serializes to a flat key=value text
/// file (one entry per line, '#' comments); unknown keys are rejected.
struct SessionConfig {
  double modulation_variance = 40.0;  // V_A
  DetectorParams detector;
  ChannelParams channel;

  // Source-side excess noise budget, quoted at V_A = 40 and scaled by
  // V_A/40. The modulation term is realized as Gaussian noise on the
  // emitted means; the phase and electronic-equivalent terms ride along
  // as pulse excess variance.
  double budget_modulation = 0.04;
  double budget_phase = 0.01;
  double budget_electronic = 0.01;

  std::uint32_t frame_len = 100;
  std::uint32_t test_pulses_per_frame = 20;
  std::uint32_t block_len = 50000;
  std::uint32_t blocks = 1;
  double symbol_rate = 1e6;  // Hz
  double margin_output = 0.02;
  double beta = 0.8;          // planning efficiency for the go/no-go check
  double attenuation = 0.2;   // dB/km
  double reveal_fraction = 0.05;
  double phase_drift = 1e-4;  // rad/frame Wiener step applied by the line
  std::uint32_t safety_bits = 128;
  std::uint64_t rng_seed = 1;

  void validate() const;

  /// Canonical text form; equal configs produce identical bytes.
  std::string serialize() const;

  static SessionConfig parse(const std::string& text);
  static SessionConfig load_file(const std::string& path);
  void save_file(const std::string& path) const;

  double budget_total() const {
    return (budget_modulation + budget_phase + budget_electronic) *
           modulation_variance / kReferenceVa;
  }
  std::uint32_t data_pulses_per_frame() const {
    return frame_len - test_pulses_per_frame;
  }
  std::uint32_t frames_per_block() const { return block_len / frame_len; }
  std::uint32_t data_per_block() const {
    return frames_per_block() * data_pulses_per_frame();
  }
  std::uint32_t test_per_block() const {
    return frames_per_block() * test_pulses_per_frame;
  }
};

/// Total added noise chi = (1-G)/G + xi, input-referred.
double total_added_noise(const ChannelParams& params);

/// Fiber transmission for a given length and attenuation in dB/km.
double gain_from_distance(double km, double attenuation_db_km);

/// Inverse of gain_from_distance.
double distance_from_gain(double gain, double attenuation_db_km);

// Normal distribution helpers shared across modules.
double normal_cdf(double z);
double inverse_normal_cdf(double p);

/// FNV-1a over a byte range; used for transcript digests and the unkeyed
/// verification hashes exchanged by the protocol.
std::uint64_t hash64(const void* data, std::size_t len);
std::uint64_t hash64_append(std::uint64_t h, const void* data, std::size_t len);

}  // namespace cvqkd

#endif
