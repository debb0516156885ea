#ifndef CVQKD_ESTIMATION_HPP
#define CVQKD_ESTIMATION_HPP

#include <span>
#include <vector>

#include "cvqkd/core.hpp"

namespace cvqkd {

/// One (Alice quadrature value, Bob measurement) sample, phase-corrected
/// and quadrature-matched.
struct EstimationPair {
  double alice = 0.0;
  double bob = 0.0;
};

struct GainEstimate {
  double gain = 0.0;
  double se = 0.0;
};

struct ExcessEstimate {
  double xi = 0.0;  // may be slightly negative; floored only for security
  double se = 0.0;
};

struct ChannelEstimate {
  double gain = 0.0;
  double xi = 0.0;
  double xi_secure = 0.0;
  std::size_t n_used = 0;
  double se_gain = 0.0;
  double se_xi = 0.0;
  bool tamper_flag = false;
};

/// Regression estimate sqrt(eta*G) = sum(a*b)/sum(a*a). Needs at least
/// 500 pairs and a non-degenerate regressor.
GainEstimate estimate_gain(std::span<const EstimationPair> pairs, double eta);

/// Residual-variance estimate of the input-referred excess noise, with
/// the shot noise unit and the calibrated electronic noise subtracted.
ExcessEstimate estimate_excess_noise(std::span<const EstimationPair> pairs,
                                     double gain_hat, double eta,
                                     double v_el);

/// Builds the full per-sample estimate with the security margin applied.
ChannelEstimate estimate_channel(std::span<const EstimationPair> pairs,
                                 double eta, double v_el,
                                 double margin_output);

/// True iff the test-pulse and revealed-sample estimates disagree beyond
/// four combined standard errors in either gain or excess noise.
bool cross_check(const ChannelEstimate& test_estimate,
                 const ChannelEstimate& revealed_estimate);

}  // namespace cvqkd

#endif
