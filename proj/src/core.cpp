#include "cvqkd/core.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace cvqkd {

double total_added_noise(const ChannelParams& params) {
  if (!(params.gain > 0.0))
    throw InvalidArgument("total_added_noise: gain must be positive");
  if (params.gain > 1.0)
    throw InvalidArgument("total_added_noise: gain must be <= 1");
  if (!(params.excess >= 0.0))
    throw InvalidArgument("total_added_noise: excess noise must be >= 0");
  return (1.0 - params.gain) / params.gain + params.excess;
}

double gain_from_distance(double km, double attenuation_db_km) {
  if (!(km >= 0.0)) throw InvalidArgument("distance must be >= 0");
  if (!(attenuation_db_km > 0.0))
    throw InvalidArgument("attenuation must be > 0");
  return std::pow(10.0, -attenuation_db_km * km / 10.0);
}

double distance_from_gain(double gain, double attenuation_db_km) {
  if (!(gain > 0.0) || gain > 1.0)
    throw InvalidArgument("gain must be in (0, 1]");
  if (!(attenuation_db_km > 0.0))
    throw InvalidArgument("attenuation must be > 0");
  return -10.0 * std::log10(gain) / attenuation_db_km;
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double inverse_normal_cdf(double p) {
  if (!(p > 0.0) || !(p < 1.0))
    throw InvalidArgument("inverse_normal_cdf: p must be in (0, 1)");
  // Acklam's rational approximation, then one Halley step against erfc.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

std::uint64_t hash64_append(std::uint64_t h, const void* data,
                            std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash64(const void* data, std::size_t len) {
  return hash64_append(0xcbf29ce484222325ULL, data, len);
}

void SessionConfig::validate() const {
  if (!(modulation_variance > 0.0))
    throw InvalidArgument("modulation_variance must be > 0");
  detector.validate();
  channel.validate();
  if (!(budget_modulation >= 0.0) || !(budget_phase >= 0.0) ||
      !(budget_electronic >= 0.0))
    throw InvalidArgument("noise budget terms must be >= 0");
  if (frame_len == 0) throw InvalidArgument("frame_len must be > 0");
  if (test_pulses_per_frame >= frame_len)
    throw InvalidArgument("test_pulses_per_frame must be < frame_len");
  if (test_pulses_per_frame == 0)
    throw InvalidArgument("test_pulses_per_frame must be > 0");
  if (block_len == 0 || block_len % frame_len != 0)
    throw InvalidArgument("block_len must be a positive multiple of frame_len");
  if (blocks == 0) throw InvalidArgument("blocks must be > 0");
  if (!(symbol_rate > 0.0)) throw InvalidArgument("symbol_rate must be > 0");
  if (!(margin_output >= 0.0)) throw InvalidArgument("margin must be >= 0");
  if (!(beta > 0.0) || beta > 1.0)
    throw InvalidArgument("beta must be in (0, 1]");
  if (!(attenuation > 0.0)) throw InvalidArgument("attenuation must be > 0");
  if (!(reveal_fraction > 0.0) || !(reveal_fraction < 1.0))
    throw InvalidArgument("reveal_fraction must be in (0, 1)");
  if (!(phase_drift >= 0.0)) throw InvalidArgument("phase_drift must be >= 0");
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string SessionConfig::serialize() const {
  std::ostringstream out;
  out << "# cvqkd session configuration\n";
  out << "modulation_variance = " << fmt_double(modulation_variance) << "\n";
  out << "detector_efficiency = " << fmt_double(detector.efficiency) << "\n";
  out << "electronic_noise = " << fmt_double(detector.electronic) << "\n";
  out << "channel_gain = " << fmt_double(channel.gain) << "\n";
  out << "channel_excess = " << fmt_double(channel.excess) << "\n";
  out << "budget_modulation = " << fmt_double(budget_modulation) << "\n";
  out << "budget_phase = " << fmt_double(budget_phase) << "\n";
  out << "budget_electronic = " << fmt_double(budget_electronic) << "\n";
  out << "frame_len = " << frame_len << "\n";
  out << "test_pulses_per_frame = " << test_pulses_per_frame << "\n";
  out << "block_len = " << block_len << "\n";
  out << "blocks = " << blocks << "\n";
  out << "symbol_rate = " << fmt_double(symbol_rate) << "\n";
  out << "margin_output = " << fmt_double(margin_output) << "\n";
  out << "beta = " << fmt_double(beta) << "\n";
  out << "attenuation = " << fmt_double(attenuation) << "\n";
  out << "reveal_fraction = " << fmt_double(reveal_fraction) << "\n";
  out << "phase_drift = " << fmt_double(phase_drift) << "\n";
  out << "safety_bits = " << safety_bits << "\n";
  out << "seed = " << rng_seed << "\n";
  return out.str();
}

SessionConfig SessionConfig::parse(const std::string& text) {
  SessionConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto skip = [](const std::string& s, std::size_t i) {
      while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
      return i;
    };
    std::size_t i = skip(line, 0);
    if (i == line.size()) continue;
    const auto eq = line.find('=', i);
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(lineno) +
                            ": expected key = value");
    std::size_t kend = eq;
    while (kend > i && (line[kend - 1] == ' ' || line[kend - 1] == '\t'))
      --kend;
    const std::string key = line.substr(i, kend - i);
    std::size_t v = skip(line, eq + 1);
    std::size_t vend = line.size();
    while (vend > v && (line[vend - 1] == ' ' || line[vend - 1] == '\t' ||
                        line[vend - 1] == '\r'))
      --vend;
    const std::string value = line.substr(v, vend - v);
    if (value.empty())
      throw InvalidArgument("config key '" + key + "' has no value");

    auto as_double = [&]() {
      std::size_t pos = 0;
      double d = std::stod(value, &pos);
      if (pos != value.size())
        throw InvalidArgument("config key '" + key + "': bad number '" +
                              value + "'");
      return d;
    };
    auto as_u32 = [&]() {
      const double d = as_double();
      if (d < 0 || d != std::floor(d) || d > 4294967295.0)
        throw InvalidArgument("config key '" + key +
                              "': expected non-negative integer");
      return static_cast<std::uint32_t>(d);
    };
    auto as_u64 = [&]() {
      std::size_t pos = 0;
      const unsigned long long u = std::stoull(value, &pos);
      if (pos != value.size())
        throw InvalidArgument("config key '" + key + "': bad integer");
      return static_cast<std::uint64_t>(u);
    };

    if (key == "modulation_variance") cfg.modulation_variance = as_double();
    else if (key == "detector_efficiency") cfg.detector.efficiency = as_double();
    else if (key == "electronic_noise") cfg.detector.electronic = as_double();
    else if (key == "channel_gain") cfg.channel.gain = as_double();
    else if (key == "channel_excess") cfg.channel.excess = as_double();
    else if (key == "budget_modulation") cfg.budget_modulation = as_double();
    else if (key == "budget_phase") cfg.budget_phase = as_double();
    else if (key == "budget_electronic") cfg.budget_electronic = as_double();
    else if (key == "frame_len") cfg.frame_len = as_u32();
    else if (key == "test_pulses_per_frame") cfg.test_pulses_per_frame = as_u32();
    else if (key == "block_len") cfg.block_len = as_u32();
    else if (key == "blocks") cfg.blocks = as_u32();
    else if (key == "symbol_rate") cfg.symbol_rate = as_double();
    else if (key == "margin_output") cfg.margin_output = as_double();
    else if (key == "beta") cfg.beta = as_double();
    else if (key == "attenuation") cfg.attenuation = as_double();
    else if (key == "reveal_fraction") cfg.reveal_fraction = as_double();
    else if (key == "phase_drift") cfg.phase_drift = as_double();
    else if (key == "safety_bits") cfg.safety_bits = as_u32();
    else if (key == "seed") cfg.rng_seed = as_u64();
    else
      throw InvalidArgument("unknown config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

SessionConfig SessionConfig::load_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

void SessionConfig::save_file(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write config file: " + path);
  f << serialize();
}

}  // namespace cvqkd
