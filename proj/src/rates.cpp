#include "cvqkd/rates.hpp"

#include <algorithm>
#include <cmath>

namespace cvqkd {

namespace {

void check_common(double va, double gain, double xi, double eta) {
  if (!(va >= 0.0)) throw InvalidArgument("rates: va must be >= 0");
  if (!(gain > 0.0) || gain > 1.0)
    throw InvalidArgument("rates: gain must be in (0, 1]");
  if (!(xi >= 0.0)) throw InvalidArgument("rates: xi must be >= 0");
  if (!(eta > 0.0) || eta > 1.0)
    throw InvalidArgument("rates: eta must be in (0, 1]");
}

// Detector defects handed to the eavesdropper: the eta beamsplitter and
// the electronic noise become part of the channel, leaving an ideal
// detector behind.
RatePoint fold_paranoid(const RatePoint& p) {
  RatePoint f = p;
  f.gain = p.eta * p.gain;
  f.xi = p.xi + (1.0 - p.eta) / (p.eta * p.gain) + p.v_el / (p.eta * p.gain);
  f.eta = 1.0;
  f.v_el = 0.0;
  f.mode = SecurityMode::Realistic;
  return f;
}

}  // namespace

double i_ab(double va, double gain, double xi, double eta) {
  check_common(va, gain, xi, eta);
  const double s = eta * gain;
  return 0.5 * std::log2((s * va + 1.0 + s * xi) / (1.0 + s * xi));
}

double i_be_max(double va, double gain, double xi, double eta) {
  check_common(va, gain, xi, eta);
  const double s = eta * gain;
  const double bracket = 1.0 - gain + gain * xi + gain / (va + 1.0);
  if (!(bracket > 0.0))
    throw InvalidArgument("i_be_max: conditional-variance bracket <= 0");
  return 0.5 * std::log2((s * va + 1.0 + s * xi) /
                         (eta / bracket + 1.0 - eta));
}

double delta_i(double va, double gain, double xi, double eta) {
  return i_ab(va, gain, xi, eta) - i_be_max(va, gain, xi, eta);
}

double delta_i_eff(double va, double gain, double xi, double eta,
                   double beta) {
  if (!(beta > 0.0) || beta > 1.0)
    throw InvalidArgument("delta_i_eff: beta must be in (0, 1]");
  return beta * i_ab(va, gain, xi, eta) - i_be_max(va, gain, xi, eta);
}

RateReport evaluate_point(const RatePoint& p, double symbol_rate,
                          double data_fraction, double reveal_fraction) {
  const RatePoint eff =
      p.mode == SecurityMode::Paranoid ? fold_paranoid(p) : p;
  RateReport r;
  r.axis_value = p.gain;
  r.gain = p.gain;
  r.va = p.va;
  r.xi_used = p.xi;
  r.eta = p.eta;
  r.beta = p.beta;
  r.i_ab = i_ab(eff.va, eff.gain, eff.xi, eff.eta);
  r.i_be_max = i_be_max(eff.va, eff.gain, eff.xi, eff.eta);
  r.delta_i = r.i_ab - r.i_be_max;
  r.delta_i_eff = p.beta * r.i_ab - r.i_be_max;
  r.secret_rate = std::max(0.0, r.delta_i_eff) * symbol_rate *
                  data_fraction * (1.0 - reveal_fraction);
  return r;
}

double apply_output_margin(double xi_hat, double gain, double eta,
                           double margin_output) {
  if (!(margin_output >= 0.0))
    throw InvalidArgument("margin must be >= 0");
  if (!(gain > 0.0) || !(eta > 0.0))
    throw InvalidArgument("margin conversion needs positive eta*G");
  return std::max(xi_hat, 0.0) + margin_output / (eta * gain);
}

VaOptimum optimize_va(double gain, double xi_at_40, double eta, double beta,
                      double va_lo, double va_hi, double margin_output) {
  if (!(va_lo < va_hi)) throw InvalidArgument("optimize_va: inverted bounds");
  auto rate_at = [&](double va) {
    double xi = xi_at_40 * va / kReferenceVa;
    if (margin_output > 0.0)
      xi = apply_output_margin(xi, gain, eta, margin_output);
    return delta_i_eff(va, gain, xi, eta, beta);
  };
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = va_lo, b = va_hi;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = rate_at(c), fd = rate_at(d);
  while (b - a > 1e-3) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = rate_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = rate_at(d);
    }
  }
  VaOptimum best;
  best.va = 0.5 * (a + b);
  best.rate = rate_at(best.va);
  // the maximum may sit on a bound; golden section alone won't pin it
  for (double edge : {va_lo, va_hi}) {
    const double r = rate_at(edge);
    if (r > best.rate) best = {edge, r};
  }
  return best;
}

DistanceLimit max_distance(const MaxDistanceQuery& q) {
  auto rate_at = [&](double km) {
    const double gain = gain_from_distance(km, q.attenuation);
    if (q.optimize) {
      // optimize_va already folds the margin into the objective
      return optimize_va(gain, q.xi_at_40, q.eta, q.beta, q.va_lo, q.va_hi,
                         q.margin_output)
          .rate;
    }
    RatePoint p;
    p.va = q.va;
    p.gain = gain;
    p.xi = q.xi_at_40 * q.va / kReferenceVa;
    if (q.margin_output > 0.0)
      p.xi = apply_output_margin(p.xi, gain, q.eta, q.margin_output);
    p.eta = q.eta;
    p.v_el = q.v_el;
    p.beta = q.beta;
    p.mode = q.mode;
    return evaluate_point(p).delta_i_eff;
  };

  DistanceLimit out;
  if (rate_at(0.0) <= 0.0) {
    out.km = 0.0;
    return out;
  }
  if (rate_at(q.cap_km) > 0.0) {
    out.km = q.cap_km;
    out.at_cap = true;
    return out;
  }
  double lo = 0.0, hi = q.cap_km;
  while (hi - lo > 0.1) {
    const double mid = 0.5 * (lo + hi);
    (rate_at(mid) > 0.0 ? lo : hi) = mid;
  }
  out.km = lo;
  return out;
}

}  // namespace cvqkd
