#ifndef CVQKD_RATES_HPP
#define CVQKD_RATES_HPP

#include <cstdint>

#include "cvqkd/core.hpp"

namespace cvqkd {

enum class SecurityMode : std::uint8_t {
  /// Detector efficiency and electronic noise are trusted calibrated
  /// imperfections on Bob's side, out of the eavesdropper's reach.
  Realistic = 0,
  /// Detector imperfections are granted to the eavesdropper by folding
  /// them into the channel before evaluating the rate formulas.
  Paranoid = 1,
};

struct RatePoint {
  double va = 40.0;
  double gain = 1.0;
  double xi = 0.06;    // input-referred excess noise entering the formulas
  double eta = 0.6;
  double v_el = 0.01;  // only used in paranoid mode
  double beta = 1.0;
  SecurityMode mode = SecurityMode::Realistic;
};

struct RateReport {
  double axis_value = 0.0;  // gain or distance, depending on the sweep axis
  double gain = 0.0;
  double va = 0.0;
  double xi_used = 0.0;
  double eta = 0.0;
  double beta = 0.0;
  double i_ab = 0.0;        // bits/pulse
  double i_be_max = 0.0;    // bits/pulse
  double delta_i = 0.0;     // i_ab - i_be_max
  double delta_i_eff = 0.0; // beta*i_ab - i_be_max
  double secret_rate = 0.0; // bits/s after frame and reveal deductions
};

/// Mutual information between Alice's modulation and Bob's homodyne data.
double i_ab(double va, double gain, double xi, double eta);

/// Upper bound on the eavesdropper's information about Bob's data.
double i_be_max(double va, double gain, double xi, double eta);

double delta_i(double va, double gain, double xi, double eta);
double delta_i_eff(double va, double gain, double xi, double eta, double beta);

/// Evaluates one operating point, applying the paranoid-mode folding when
/// requested. secret_rate applies the data fraction and reveal fraction
/// deductions on top of the symbol rate.
RateReport evaluate_point(const RatePoint& p, double symbol_rate = 1e6,
                          double data_fraction = 0.8,
                          double reveal_fraction = 0.05);

/// Output-referred margin converted to the channel input and added to the
/// (floored) excess-noise estimate.
double apply_output_margin(double xi_hat, double gain, double eta,
                           double margin_output);

struct VaOptimum {
  double va = 0.0;
  double rate = 0.0;
};

/// Maximizes delta_i_eff over the modulation variance with the excess
/// noise scaling proportionally (xi_at_40 quoted at V_A = 40).
/// Golden-section search; |bracket| shrinks below 1e-3.
VaOptimum optimize_va(double gain, double xi_at_40, double eta, double beta,
                      double va_lo = 10.0, double va_hi = 100.0,
                      double margin_output = 0.0);

struct DistanceLimit {
  double km = 0.0;
  bool at_cap = false;  // rate still positive at the search cap
};

struct MaxDistanceQuery {
  double va = 40.0;
  double xi_at_40 = 0.06;
  double eta = 0.6;
  double v_el = 0.01;
  double beta = 1.0;
  double attenuation = 0.2;
  double margin_output = 0.0;  // 0 disables the margin rule
  bool optimize = false;
  double va_lo = 10.0;
  double va_hi = 100.0;
  double cap_km = 100.0;
  SecurityMode mode = SecurityMode::Realistic;
};

/// Largest distance with positive delta_i_eff, by bisection to 0.1 km.
DistanceLimit max_distance(const MaxDistanceQuery& q);

}  // namespace cvqkd

#endif
