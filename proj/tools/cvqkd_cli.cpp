// Command-line front end. Links the public C API only.
#include <chrono>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cvqkd.h"

namespace {

// exit codes, also documented in --help
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNoPositiveRate = 3;
constexpr int kExitTamper = 4;
constexpr int kExitLink = 5;
constexpr int kExitConfigMismatch = 6;
constexpr int kExitSync = 7;
constexpr int kExitReconcile = 8;
constexpr int kExitError = 9;

int exit_code_for(cvqkd_status s) {
  switch (s) {
    case CVQKD_OK: return kExitOk;
    case CVQKD_ERR_NO_POSITIVE_RATE: return kExitNoPositiveRate;
    case CVQKD_ERR_TAMPER_DETECTED: return kExitTamper;
    case CVQKD_ERR_LINK: return kExitLink;
    case CVQKD_ERR_CONFIG_MISMATCH: return kExitConfigMismatch;
    case CVQKD_ERR_SYNC: return kExitSync;
    case CVQKD_ERR_RECONCILE: return kExitReconcile;
    case CVQKD_ERR_INVALID_ARGUMENT:
    case CVQKD_ERR_PARSE: return kExitUsage;
    default: return kExitError;
  }
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct RateOptions {
  double va = 40.0;
  double xi = 0.06;
  double eta = 0.6;
  double vel = 0.01;
  double beta = 1.0;
  double attenuation = 0.2;
  std::string mode = "realistic";
  bool margin = false;
  double margin_value = 0.02;
};

void add_rate_options(CLI::App* cmd, RateOptions& o) {
  cmd->add_option("--va", o.va, "modulation variance (shot-noise units)");
  cmd->add_option("--xi", o.xi, "input-referred excess noise");
  cmd->add_option("--eta", o.eta, "detector efficiency");
  cmd->add_option("--vel", o.vel, "electronic noise");
  cmd->add_option("--beta", o.beta, "reconciliation efficiency");
  cmd->add_option("--attenuation", o.attenuation, "fiber loss, dB/km");
  cmd->add_option("--mode", o.mode, "realistic|paranoid")
      ->check(CLI::IsMember({"realistic", "paranoid"}));
  cmd->add_flag("--margin", o.margin,
                "apply the output-noise security margin");
  cmd->add_option("--margin-value", o.margin_value,
                  "margin size (shot-noise units at the output)");
}

const char kCsvHeader[] =
    "axis_value,G,V_A,xi_used,eta,beta,i_ab,i_be_max,delta_i,delta_i_eff";

int emit_rate_row(std::ostream& out, double axis_value, double gain,
                  const RateOptions& o, bool scale_xi_with_va = false,
                  double va_override = -1.0) {
  const double va = va_override > 0.0 ? va_override : o.va;
  double xi = scale_xi_with_va ? o.xi * va / 40.0 : o.xi;
  if (o.margin) {
    if (cvqkd_margined_xi(xi, gain, o.eta, o.margin_value, &xi) != CVQKD_OK)
      return kExitUsage;
  }
  cvqkd_rate_params p{va, gain, xi, o.eta, o.vel, o.beta,
                      o.mode == "paranoid" ? 1 : 0};
  cvqkd_rate_report r{};
  const cvqkd_status s = cvqkd_rates(&p, &r);
  if (s != CVQKD_OK) {
    std::cerr << "rates: " << cvqkd_status_str(s) << "\n";
    return exit_code_for(s);
  }
  out << fmt6(axis_value) << ',' << fmt6(gain) << ',' << fmt6(va) << ','
      << fmt6(xi) << ',' << fmt6(o.eta) << ',' << fmt6(o.beta) << ','
      << fmt6(r.i_ab) << ',' << fmt6(r.i_be_max) << ',' << fmt6(r.delta_i)
      << ',' << fmt6(r.delta_i_eff) << '\n';
  return kExitOk;
}

std::uint64_t env_or_seed(std::uint64_t seed) {
  if (const char* env = std::getenv("CVQKD_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0') return v;
    std::cerr << "warning: ignoring malformed CVQKD_SEED\n";
  }
  return seed;
}

void write_key_file(const std::string& path, const uint8_t* bytes,
                    uint64_t len_bits) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  uint8_t header[8];
  for (int i = 0; i < 8; ++i)
    header[i] = static_cast<uint8_t>(len_bits >> (8 * i));
  f.write(reinterpret_cast<const char*>(header), 8);
  f.write(reinterpret_cast<const char*>(bytes),
          static_cast<std::streamsize>((len_bits + 7) / 8));
}

void write_blob(const std::string& path, const uint8_t* bytes, size_t len) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes),
          static_cast<std::streamsize>(len));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "cvqkd: continuous-variable QKD simulator and rate calculator\n"
      "exit codes: 0 done, 2 usage, 3 no-positive-rate, 4 tamper,\n"
      "            5 link error, 6 config mismatch, 7 sync, 8 reconcile"};
  app.require_subcommand(1);

  // rates -----------------------------------------------------------------
  auto* rates = app.add_subcommand("rates", "closed-form rates at one point");
  RateOptions ro;
  double r_gain = -1.0, r_distance = -1.0;
  rates->add_option("--gain", r_gain, "channel gain in (0,1]");
  rates->add_option("--distance", r_distance, "fiber length, km");
  add_rate_options(rates, ro);

  // sweep -----------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "rate curves over gain or distance");
  RateOptions so;
  std::string s_axis = "distance";
  double s_start = 0.0, s_stop = 100.0;
  unsigned s_steps = 200;
  bool s_optimize = false;
  std::string s_out;
  sweep->add_option("--axis", s_axis, "gain|distance")
      ->check(CLI::IsMember({"gain", "distance"}));
  sweep->add_option("--start", s_start, "axis start");
  sweep->add_option("--stop", s_stop, "axis stop");
  sweep->add_option("--steps", s_steps, "number of points (>= 2)");
  sweep->add_flag("--optimize-va", s_optimize,
                  "maximize over the modulation variance at each point");
  sweep->add_option("--out", s_out, "output CSV path (default stdout)");
  add_rate_options(sweep, so);

  // simulate ----------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "run a full two-endpoint session");
  std::string m_config, m_attack = "none", m_out, m_transcript;
  std::uint64_t m_seed = 1;
  unsigned m_blocks = 0;
  double m_va = -1.0, m_xi = -1.0, m_eta = -1.0, m_beta = -1.0, m_gain = -1.0;
  double m_attack_fraction = 1.0;
  bool m_no_margin = false;
  sim->add_option("--config", m_config, "session config file (key = value)");
  sim->add_option("--seed", m_seed, "session seed");
  sim->add_option("--blocks", m_blocks, "number of blocks");
  sim->add_option("--va", m_va, "modulation variance");
  sim->add_option("--xi", m_xi, "channel excess noise (on top of the source budget)");
  sim->add_option("--gain", m_gain, "channel gain");
  sim->add_option("--eta", m_eta, "detector efficiency");
  sim->add_option("--beta", m_beta, "planning reconciliation efficiency");
  sim->add_flag("--no-margin", m_no_margin, "disable the security margin");
  sim->add_option("--attack", m_attack, "none|intercept-resend")
      ->check(CLI::IsMember({"none", "intercept-resend"}));
  sim->add_option("--attack-fraction", m_attack_fraction,
                  "fraction of pulses attacked");
  sim->add_option("--out", m_out, "key file prefix");
  sim->add_option("--transcript", m_transcript, "transcript file prefix");

  // bench -------------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "pipeline and reconciliation throughput");
  std::uint64_t b_pulses = 2000000;
  unsigned b_symbols = 38000;
  bench->add_option("--pulses", b_pulses, "optical pipeline pulse count");
  bench->add_option("--symbols", b_symbols, "reconciliation block size");

  // transcript ----------------------------------------------------------------
  auto* tr = app.add_subcommand("transcript", "render a recorded transcript");
  std::string t_path;
  tr->add_option("file", t_path, "transcript file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (rates->parsed()) {
      if ((r_gain < 0.0) == (r_distance < 0.0)) {
        std::cerr << "rates: give exactly one of --gain or --distance\n";
        return kExitUsage;
      }
      double gain = r_gain, axis = r_gain;
      if (r_distance >= 0.0) {
        if (cvqkd_gain_from_distance(r_distance, ro.attenuation, &gain) !=
            CVQKD_OK) {
          std::cerr << "rates: bad distance\n";
          return kExitUsage;
        }
        axis = r_distance;
      }
      std::cout << kCsvHeader << '\n';
      return emit_rate_row(std::cout, axis, gain, ro);
    }

    if (sweep->parsed()) {
      if (s_steps < 2 || !(s_start < s_stop)) {
        std::cerr << "sweep: need steps >= 2 and start < stop\n";
        return kExitUsage;
      }
      std::ofstream file;
      std::ostream* out = &std::cout;
      if (!s_out.empty()) {
        file.open(s_out);
        if (!file) {
          std::cerr << "sweep: cannot open " << s_out << "\n";
          return kExitUsage;
        }
        out = &file;
      }
      *out << kCsvHeader << '\n';
      for (unsigned i = 0; i < s_steps; ++i) {
        const double axis =
            s_start + (s_stop - s_start) * i / double(s_steps - 1);
        double gain = axis;
        if (s_axis == "distance" &&
            cvqkd_gain_from_distance(axis, so.attenuation, &gain) != CVQKD_OK) {
          std::cerr << "sweep: bad axis value\n";
          return kExitUsage;
        }
        if (gain <= 0.0 || gain > 1.0) continue;
        double va = so.va;
        if (s_optimize) {
          double rate;
          if (cvqkd_optimize_va(gain, so.xi, so.eta, so.beta, 10.0, 100.0,
                                so.margin ? so.margin_value : 0.0, &va,
                                &rate) != CVQKD_OK) {
            std::cerr << "sweep: optimization failed\n";
            return kExitError;
          }
        }
        const int rc = emit_rate_row(*out, axis, gain, so, s_optimize, va);
        if (rc != kExitOk) return rc;
      }
      return kExitOk;
    }

    if (sim->parsed()) {
      cvqkd_config* cfg = cvqkd_config_new();
      auto fail_usage = [&](const std::string& what) {
        std::cerr << "simulate: " << what << "\n";
        cvqkd_config_free(cfg);
        return kExitUsage;
      };
      if (!m_config.empty()) {
        const cvqkd_status s = cvqkd_config_load_file(cfg, m_config.c_str());
        if (s != CVQKD_OK) return fail_usage("config: " + std::string(cvqkd_status_str(s)));
      }
      auto set = [&](const char* k, const std::string& v) {
        return cvqkd_config_set(cfg, k, v.c_str()) == CVQKD_OK;
      };
      // a config file's seed survives unless the flag or the environment
      // explicitly overrides it
      if (sim->count("--seed") || std::getenv("CVQKD_SEED") ||
          m_config.empty()) {
        const std::uint64_t seed = env_or_seed(m_seed);
        if (!set("seed", std::to_string(seed))) return fail_usage("bad seed");
      }
      if (m_blocks != 0 && !set("blocks", std::to_string(m_blocks)))
        return fail_usage("bad blocks");
      if (sim->count("--blocks") && m_blocks == 0)
        return fail_usage("blocks must be > 0");
      if (m_va > 0.0 && !set("modulation_variance", std::to_string(m_va)))
        return fail_usage("bad va");
      if (m_xi >= 0.0 && !set("channel_excess", std::to_string(m_xi)))
        return fail_usage("bad xi");
      if (m_gain > 0.0 && !set("channel_gain", std::to_string(m_gain)))
        return fail_usage("bad gain");
      if (m_eta > 0.0 && !set("detector_efficiency", std::to_string(m_eta)))
        return fail_usage("bad eta");
      if (m_beta > 0.0 && !set("beta", std::to_string(m_beta)))
        return fail_usage("bad beta");
      if (m_no_margin && !set("margin_output", "0")) return fail_usage("margin");

      const cvqkd_attack attack = m_attack == "intercept-resend"
                                      ? CVQKD_ATTACK_INTERCEPT_RESEND
                                      : CVQKD_ATTACK_NONE;
      cvqkd_session_result* result = nullptr;
      const auto t0 = std::chrono::steady_clock::now();
      cvqkd_status s = cvqkd_session_run(cfg, attack, m_attack_fraction, &result);
      const auto t1 = std::chrono::steady_clock::now();
      if (s != CVQKD_OK) {
        std::cerr << "simulate: " << cvqkd_status_str(s) << "\n";
        cvqkd_config_free(cfg);
        return exit_code_for(s);
      }
      std::cout << cvqkd_session_report_text(result);
      const cvqkd_status outcome = cvqkd_session_outcome(result);

      const uint8_t* kb = nullptr;
      uint64_t kbits = 0;
      cvqkd_session_key(result, 1, &kb, &kbits);
      std::cout << "key bits: " << kbits << "\n";

      // timing goes to stderr so stdout stays byte-reproducible
      const double dt = std::chrono::duration<double>(t1 - t0).count();
      std::cerr << "session wall time: " << dt << " s\n";

      if (outcome == CVQKD_OK && !m_out.empty()) {
        const uint8_t* ab = nullptr;
        uint64_t abits = 0;
        cvqkd_session_key(result, 0, &ab, &abits);
        write_key_file(m_out + "_alice.key", ab, abits);
        write_key_file(m_out + "_bob.key", kb, kbits);
      }
      if (!m_transcript.empty()) {
        const uint8_t* tb = nullptr;
        size_t tlen = 0;
        cvqkd_session_transcript(result, 0, &tb, &tlen);
        write_blob(m_transcript + ".alice.ct", tb, tlen);
        cvqkd_session_transcript(result, 1, &tb, &tlen);
        write_blob(m_transcript + ".bob.ct", tb, tlen);
      }
      cvqkd_session_result_free(result);
      cvqkd_config_free(cfg);
      return exit_code_for(outcome);
    }

    if (bench->parsed()) {
      double pipeline = 0.0;
      cvqkd_status s = cvqkd_bench_pipeline(b_pulses, &pipeline);
      if (s != CVQKD_OK) {
        std::cerr << "bench: " << cvqkd_status_str(s) << "\n";
        return kExitError;
      }
      std::cout << "pipeline: " << fmt6(pipeline) << " symbols/s\n";
      double recon = 0.0, beta = 0.0;
      s = cvqkd_bench_reconciliation(b_symbols, &recon, &beta);
      if (s != CVQKD_OK) {
        std::cerr << "bench: " << cvqkd_status_str(s) << "\n";
        return kExitError;
      }
      std::cout << "reconciliation: " << fmt6(recon)
                << " symbols/s (beta=" << fmt6(beta) << ")\n";
      return kExitOk;
    }

    if (tr->parsed()) {
      std::ifstream f(t_path, std::ios::binary);
      if (!f) {
        std::cerr << "transcript: cannot open " << t_path << "\n";
        return kExitUsage;
      }
      std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
      char* text = nullptr;
      const cvqkd_status s =
          cvqkd_transcript_render(bytes.data(), bytes.size(), &text);
      if (s != CVQKD_OK) {
        std::cerr << "transcript: " << cvqkd_status_str(s) << "\n";
        return exit_code_for(s);
      }
      std::cout << text;
      cvqkd_string_free(text);
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
