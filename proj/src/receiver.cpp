#include "cvqkd/receiver.hpp"

#include <cmath>

namespace cvqkd {

double measure_value(const PulseState& pulse, Quadrature q,
                     const DetectorParams& det, Rng& rng) {
  const double mean = q == Quadrature::X ? pulse.mean_x : pulse.mean_p;
  const double var =
      1.0 + det.efficiency * pulse.excess_var + det.electronic;
  return std::sqrt(det.efficiency) * mean +
         std::sqrt(var) * rng.gaussian();
}

CalibrationResult calibrate(const DetectorParams& det, std::uint64_t n,
                            Rng& rng) {
  det.validate();
  if (n < 10000) throw InvalidArgument("calibrate: need n >= 10^4");

  auto sample_variance = [&](double var) {
    const double sd = std::sqrt(var);
    double sum = 0.0, sum2 = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
      const double v = sd * rng.gaussian();
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / static_cast<double>(n);
    return sum2 / static_cast<double>(n) - mean * mean;
  };

  CalibrationResult r;
  // input blocked: only the amplification chain contributes
  r.v_el = sample_variance(det.electronic);
  r.v_el_se = r.v_el * std::sqrt(2.0 / static_cast<double>(n));
  // vacuum input: shot noise plus electronic noise
  const double vac = sample_variance(1.0 + det.electronic);
  const double vac_se = vac * std::sqrt(2.0 / static_cast<double>(n));
  r.shot_noise = vac - r.v_el;
  r.shot_noise_se = std::sqrt(vac_se * vac_se + r.v_el_se * r.v_el_se);
  return r;
}

}  // namespace cvqkd
