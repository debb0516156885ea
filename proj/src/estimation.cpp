#include "cvqkd/estimation.hpp"

#include <cmath>

#include "cvqkd/rates.hpp"

namespace cvqkd {

GainEstimate estimate_gain(std::span<const EstimationPair> pairs, double eta) {
  if (pairs.size() < 500)
    throw InvalidArgument("estimate_gain: need at least 500 pairs");
  if (!(eta > 0.0) || eta > 1.0)
    throw InvalidArgument("estimate_gain: eta must be in (0, 1]");
  double saa = 0.0, sab = 0.0;
  for (const auto& p : pairs) {
    saa += p.alice * p.alice;
    sab += p.alice * p.bob;
  }
  if (!(saa > 0.0))
    throw InvalidArgument("estimate_gain: degenerate regressor");
  const double slope = sab / saa;  // sqrt(eta*G)
  // residual noise drives the slope uncertainty
  double rss = 0.0;
  for (const auto& p : pairs) {
    const double r = p.bob - slope * p.alice;
    rss += r * r;
  }
  const double resid_var = rss / static_cast<double>(pairs.size());
  const double se_slope = std::sqrt(resid_var / saa);
  GainEstimate g;
  g.gain = slope * slope / eta;
  g.se = 2.0 * std::fabs(slope) * se_slope / eta;
  return g;
}

ExcessEstimate estimate_excess_noise(std::span<const EstimationPair> pairs,
                                     double gain_hat, double eta,
                                     double v_el) {
  if (pairs.empty()) throw InvalidArgument("estimate_excess_noise: no pairs");
  const double s = eta * gain_hat;
  if (!(s > 1e-4))
    throw InvalidArgument("estimate_excess_noise: eta*G too small to estimate");
  const double slope = std::sqrt(s);
  double rss = 0.0;
  for (const auto& p : pairs) {
    const double r = p.bob - slope * p.alice;
    rss += r * r;
  }
  const double resid_var = rss / static_cast<double>(pairs.size());
  ExcessEstimate x;
  x.xi = (resid_var - 1.0 - v_el) / s;
  x.se = resid_var * std::sqrt(2.0 / static_cast<double>(pairs.size())) / s;
  return x;
}

ChannelEstimate estimate_channel(std::span<const EstimationPair> pairs,
                                 double eta, double v_el,
                                 double margin_output) {
  const GainEstimate g = estimate_gain(pairs, eta);
  const ExcessEstimate x = estimate_excess_noise(pairs, g.gain, eta, v_el);
  ChannelEstimate est;
  est.gain = g.gain;
  est.se_gain = g.se;
  est.xi = x.xi;
  est.se_xi = x.se;
  est.n_used = pairs.size();
  est.xi_secure = apply_output_margin(x.xi, g.gain, eta, margin_output);
  // a passive line cannot amplify; allow only statistical overshoot
  est.tamper_flag = est.gain > 1.05;
  return est;
}

bool cross_check(const ChannelEstimate& test_estimate,
                 const ChannelEstimate& revealed_estimate) {
  auto exceeds = [](double a, double b, double se_a, double se_b) {
    const double se = std::sqrt(se_a * se_a + se_b * se_b);
    return std::fabs(a - b) > 4.0 * se;
  };
  if (test_estimate.tamper_flag || revealed_estimate.tamper_flag) return true;
  return exceeds(test_estimate.gain, revealed_estimate.gain,
                 test_estimate.se_gain, revealed_estimate.se_gain) ||
         exceeds(test_estimate.xi, revealed_estimate.xi, test_estimate.se_xi,
                 revealed_estimate.se_xi);
}

}  // namespace cvqkd
