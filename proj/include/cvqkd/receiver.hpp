#ifndef CVQKD_RECEIVER_HPP
#define CVQKD_RECEIVER_HPP

#include <vector>

#include "cvqkd/core.hpp"
#include "cvqkd/rng.hpp"

namespace cvqkd {

enum class Quadrature : std::uint8_t { X = 0, P = 1 };

struct Measurement {
  double value = 0.0;  // sqrt(V0) units, raw (no 1/sqrt(eta) rescaling)
  Quadrature quadrature = Quadrature::X;
  std::uint64_t pulse_index = 0;
};

struct CalibrationResult {
  double shot_noise = 0.0;  // vacuum variance after v_el subtraction
  double shot_noise_se = 0.0;
  double v_el = 0.0;
  double v_el_se = 0.0;
};

/// Homodyne measurement of one quadrature. Detector loss is a beamsplitter
/// of transmission eta mixing in vacuum, electronic noise adds at the
/// output: value ~ N(sqrt(eta)*mean_q, 1 + eta*excess_var + v_el).
double measure_value(const PulseState& pulse, Quadrature q,
                     const DetectorParams& det, Rng& rng);

/// Two calibration runs of n pulses each: input blocked (electronic noise
/// alone), then vacuum input. Requires n >= 10^4 for usable estimates.
CalibrationResult calibrate(const DetectorParams& det, std::uint64_t n,
                            Rng& rng);

/// Bob's detector: uniformly random quadrature choice per pulse,
/// independent of everything else.
class Receiver {
 public:
  Receiver(const DetectorParams& det, std::uint64_t seed)
      : det_(det), rng_(seed) {
    det.validate();
  }

  Measurement measure(const PulseState& pulse, std::uint64_t index) {
    Measurement m;
    m.quadrature = rng_.coin() ? Quadrature::P : Quadrature::X;
    m.value = measure_value(pulse, m.quadrature, det_, rng_);
    m.pulse_index = index;
    return m;
  }

  CalibrationResult run_calibration(std::uint64_t n) {
    return calibrate(det_, n, rng_);
  }

  const DetectorParams& detector() const { return det_; }

 private:
  DetectorParams det_;
  Rng rng_;
};

}  // namespace cvqkd

#endif
