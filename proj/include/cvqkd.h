/* Public C interface to the cvqkd engine.
 *
 * The library is consumed through opaque handles and plain structs; every
 * call returns a cvqkd_status. Strings and buffers returned through out
 * parameters stay owned by the handle that produced them and remain valid
 * until that handle is freed.
 */

#ifndef CVQKD_H
#define CVQKD_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CVQKD_API __declspec(dllexport)
#else
#define CVQKD_API __attribute__((visibility("default")))
#endif

typedef enum cvqkd_status {
  CVQKD_OK = 0,
  CVQKD_ERR_INVALID_ARGUMENT = 1,
  CVQKD_ERR_PARSE = 2,
  CVQKD_ERR_IO = 3,
  CVQKD_ERR_NO_POSITIVE_RATE = 4,
  CVQKD_ERR_TAMPER_DETECTED = 5,
  CVQKD_ERR_LINK = 6,
  CVQKD_ERR_SYNC = 7,
  CVQKD_ERR_RECONCILE = 8,
  CVQKD_ERR_CONFIG_MISMATCH = 9,
  CVQKD_ERR_INTERNAL = 10,
} cvqkd_status;

CVQKD_API const char* cvqkd_status_str(cvqkd_status s);
CVQKD_API const char* cvqkd_version(void);

/* ------------------------------------------------------------------ */
/* Session configuration                                               */

typedef struct cvqkd_config cvqkd_config;

CVQKD_API cvqkd_config* cvqkd_config_new(void);
CVQKD_API void cvqkd_config_free(cvqkd_config* cfg);
CVQKD_API cvqkd_status cvqkd_config_set(cvqkd_config* cfg, const char* key,
                                        const char* value);
CVQKD_API cvqkd_status cvqkd_config_load_file(cvqkd_config* cfg,
                                              const char* path);
CVQKD_API cvqkd_status cvqkd_config_save_file(const cvqkd_config* cfg,
                                              const char* path);
/* Serialized canonical text; owned by the handle. */
CVQKD_API const char* cvqkd_config_text(cvqkd_config* cfg);

/* ------------------------------------------------------------------ */
/* Closed-form rate engine                                             */

typedef struct cvqkd_rate_params {
  double va;          /* modulation variance, shot-noise units  */
  double gain;        /* channel gain in (0, 1]                 */
  double xi;          /* input-referred excess noise            */
  double eta;         /* detector efficiency                    */
  double v_el;        /* electronic noise (paranoid mode only)  */
  double beta;        /* reconciliation efficiency              */
  int paranoid;       /* 0 realistic, 1 paranoid                */
} cvqkd_rate_params;

typedef struct cvqkd_rate_report {
  double i_ab;
  double i_be_max;
  double delta_i;
  double delta_i_eff;
  double secret_rate; /* bits/s at 1 MHz x 0.8 x 0.95 deductions */
} cvqkd_rate_report;

CVQKD_API cvqkd_status cvqkd_rates(const cvqkd_rate_params* p,
                                   cvqkd_rate_report* out);

/* Excess noise with the output-referred margin applied. */
CVQKD_API cvqkd_status cvqkd_margined_xi(double xi, double gain, double eta,
                                         double margin_output, double* out);

CVQKD_API cvqkd_status cvqkd_gain_from_distance(double km,
                                                double attenuation_db_km,
                                                double* out);
CVQKD_API cvqkd_status cvqkd_distance_from_gain(double gain,
                                                double attenuation_db_km,
                                                double* out);

/* Modulation-variance optimization; xi scales proportionally from its
 * value at va = 40. */
CVQKD_API cvqkd_status cvqkd_optimize_va(double gain, double xi_at_40,
                                         double eta, double beta,
                                         double va_lo, double va_hi,
                                         double margin_output,
                                         double* va_out, double* rate_out);

typedef struct cvqkd_distance_query {
  double va;
  double xi_at_40;
  double eta;
  double v_el;
  double beta;
  double attenuation;
  double margin_output; /* 0 disables the margin rule */
  int optimize_va;
  double va_lo, va_hi;
  double cap_km;
  int paranoid;
} cvqkd_distance_query;

CVQKD_API cvqkd_status cvqkd_max_distance(const cvqkd_distance_query* q,
                                          double* km_out, int* at_cap_out);

/* ------------------------------------------------------------------ */
/* Full protocol sessions                                              */

typedef struct cvqkd_session_result cvqkd_session_result;

typedef enum cvqkd_attack {
  CVQKD_ATTACK_NONE = 0,
  CVQKD_ATTACK_INTERCEPT_RESEND = 1,
} cvqkd_attack;

typedef struct cvqkd_block_report {
  uint32_t block_id;
  uint32_t sync_offset;
  double theta;
  double gain_hat;
  double xi_hat;
  double xi_secure;
  double i_ab;
  double i_be_max;
  double delta_i_eff;
  double beta_measured;
  uint32_t n_kept;
  uint32_t m_slices;
  uint64_t disclosed_bits;
  uint64_t secret_bits;
  int discarded;
} cvqkd_block_report;

CVQKD_API cvqkd_status cvqkd_session_run(const cvqkd_config* cfg,
                                         cvqkd_attack attack,
                                         double attack_fraction,
                                         cvqkd_session_result** out);
CVQKD_API void cvqkd_session_result_free(cvqkd_session_result* r);

/* CVQKD_OK when the session completed; otherwise the abort reason mapped
 * onto a status code. */
CVQKD_API cvqkd_status cvqkd_session_outcome(const cvqkd_session_result* r);
CVQKD_API uint32_t cvqkd_session_block_count(const cvqkd_session_result* r);
CVQKD_API cvqkd_status cvqkd_session_block(const cvqkd_session_result* r,
                                           uint32_t index,
                                           cvqkd_block_report* out);

/* Concatenated final key bits of one endpoint (0 = alice, 1 = bob),
 * LSB-first packed; *len_bits may be zero. Buffer owned by the result. */
CVQKD_API cvqkd_status cvqkd_session_key(const cvqkd_session_result* r,
                                         int endpoint, const uint8_t** bytes,
                                         uint64_t* len_bits);

/* Recorded transcript of one endpoint (0 = alice, 1 = bob). */
CVQKD_API cvqkd_status cvqkd_session_transcript(const cvqkd_session_result* r,
                                                int endpoint,
                                                const uint8_t** bytes,
                                                size_t* len);

/* Deterministic per-block detail line ("block k: ...") used by the CLI;
 * owned by the result. */
CVQKD_API const char* cvqkd_session_report_text(cvqkd_session_result* r);

/* ------------------------------------------------------------------ */
/* Tooling                                                             */

/* Renders a recorded transcript to text. *out is malloc'd; free with
 * cvqkd_string_free. */
CVQKD_API cvqkd_status cvqkd_transcript_render(const uint8_t* bytes,
                                               size_t len, char** out);
CVQKD_API void cvqkd_string_free(char* s);

/* Benchmarks: symbols per second through the optical pipeline, and
 * through one reconciliation block at the reference operating point. */
CVQKD_API cvqkd_status cvqkd_bench_pipeline(uint64_t n_pulses,
                                            double* symbols_per_sec);
CVQKD_API cvqkd_status cvqkd_bench_reconciliation(uint32_t n_symbols,
                                                  double* symbols_per_sec,
                                                  double* beta_out);

#ifdef __cplusplus
}
#endif

#endif /* CVQKD_H */
