#include "cvqkd/framing.hpp"

#include <cmath>

namespace cvqkd {

std::uint32_t detect_offset(std::span<const Measurement> measurements,
                            const FramePlan& plan,
                            double peak_ratio_threshold) {
  const std::uint32_t frame_len = plan.frame_len();
  if (measurements.size() < 2 * frame_len)
    throw SyncError("detect_offset: need at least two frames");

  // For each candidate offset, correlate the measured values against the
  // test pattern in both rotation components, so an arbitrary relative
  // phase cannot null the peak. Every offset uses the same number of
  // whole frames so the peaks are comparable.
  const std::size_t n = measurements.size();
  const std::size_t n_frames = n / frame_len - 1;
  std::vector<double> corr(frame_len, 0.0);
  for (std::uint32_t off = 0; off < frame_len; ++off) {
    double ci = 0.0, cq = 0.0;
    for (std::size_t f = 0; f < n_frames; ++f) {
      const std::size_t base = off + f * frame_len;
      for (std::size_t j = 0; j < plan.test_pattern.size(); ++j) {
        const Symbol& s = plan.test_pattern[j];
        const Measurement& m = measurements[base + j];
        if (m.quadrature == Quadrature::X) {
          ci += m.value * s.x;
          cq += m.value * -s.p;
        } else {
          ci += m.value * s.p;
          cq += m.value * s.x;
        }
      }
    }
    corr[off] = std::sqrt(ci * ci + cq * cq);
  }

  std::uint32_t best = 0;
  double best_v = -1.0, second_v = -1.0;
  for (std::uint32_t off = 0; off < frame_len; ++off) {
    if (corr[off] > best_v) {
      second_v = best_v;
      best_v = corr[off];
      best = off;
    } else if (corr[off] > second_v) {
      second_v = corr[off];
    }
  }
  if (!(best_v > 0.0) || best_v < peak_ratio_threshold * std::max(second_v, 0.0))
    throw SyncError("detect_offset: correlation peak is ambiguous");
  return best;
}

double recover_phase(std::span<const Measurement> test_measurements,
                     std::span<const Symbol> test_symbols) {
  if (test_measurements.empty() ||
      test_measurements.size() != test_symbols.size())
    throw PhaseError("recover_phase: empty or mismatched input");

  // Model: m = u*a + v*b with (u, v) = sqrt(eta G) * (cos t, sin t).
  // X measurement: a = x, b = -p.  P measurement: a = p, b = x.
  double saa = 0.0, sbb = 0.0, sab = 0.0, sma = 0.0, smb = 0.0;
  double energy = 0.0;
  for (std::size_t i = 0; i < test_measurements.size(); ++i) {
    const Measurement& m = test_measurements[i];
    const Symbol& s = test_symbols[i];
    const double a = m.quadrature == Quadrature::X ? s.x : s.p;
    const double b = m.quadrature == Quadrature::X ? -s.p : s.x;
    saa += a * a;
    sbb += b * b;
    sab += a * b;
    sma += m.value * a;
    smb += m.value * b;
    energy += m.value * m.value;
  }
  const double det = saa * sbb - sab * sab;
  if (!(det > 0.0) || !(energy > 0.0))
    throw PhaseError("recover_phase: degenerate test data");
  const double u = (sma * sbb - smb * sab) / det;
  const double v = (smb * saa - sma * sab) / det;
  if (u * u + v * v < 1e-12)
    throw PhaseError("recover_phase: test measurements are all near zero");
  return std::atan2(v, u);
}

DemuxedBlock demux_block(std::span<const Measurement> measurements,
                         const FramePlan& plan) {
  const std::uint32_t frame_len = plan.frame_len();
  if (measurements.size() % frame_len != 0)
    throw InvalidArgument("demux_block: not a whole number of frames");
  DemuxedBlock out;
  const std::size_t n_frames = measurements.size() / frame_len;
  out.test.reserve(n_frames * plan.test_pattern.size());
  out.data.reserve(n_frames * plan.data_slots);
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    const std::uint32_t slot = static_cast<std::uint32_t>(i % frame_len);
    if (plan.is_test_slot(slot)) {
      out.test.push_back(measurements[i]);
      out.test_symbols.push_back(plan.test_pattern[slot]);
    } else {
      out.data.push_back(measurements[i]);
      out.data_slot.push_back(static_cast<std::uint32_t>(i));
    }
  }
  return out;
}

}  // namespace cvqkd
