/*
 * fms - forced-motion-sideband simulation toolkit, C API.
 *
 * The shared library wraps the C++ core behind opaque handles and integer
 * status codes. Frequencies are angular (rad/s) unless a name says otherwise;
 * scenario configuration files use experimentalist units (see the README).
 *
 * Every function returns FMS_OK (0) on success. On failure the return value
 * matches the CLI exit codes and fms_last_error() carries a thread-local
 * message describing what went wrong.
 */

#ifndef FMS_FMS_H
#define FMS_FMS_H

#ifdef __cplusplus
extern "C" {
#endif

enum fms_status {
    FMS_OK = 0,
    FMS_ERR_CONFIG = 2,     /* bad configuration, file or argument */
    FMS_ERR_NUMERIC = 3,    /* numerical-validity failure (truncation, norm drift) */
    FMS_ERR_RESONANCE = 4,  /* singular parameters: drive resonant with a mode */
    FMS_ERR_USAGE = 5,      /* null pointers, dimension mismatches */
    FMS_ERR_INTERNAL = 6
};

const char* fms_version(void);

/* Thread-local message for the most recent failing call; empty string if
 * the last call on this thread succeeded. */
const char* fms_last_error(void);

/* ---- scenario runner -------------------------------------------------- */

typedef struct fms_scenario fms_scenario;

/* Parses a scenario configuration file. On success *out owns the handle and
 * must be released with fms_scenario_free. */
int fms_scenario_load(const char* path, fms_scenario** out);

/* Parses a scenario configuration from a string (diagnostics cite `origin`). */
int fms_scenario_load_string(const char* text, const char* origin, fms_scenario** out);

/* Name of the loaded scenario (e.g. "rabi-flop"); pointer valid for the
 * lifetime of the handle. */
const char* fms_scenario_name(const fms_scenario* s);

/* Runs the scenario; CSV files and run_manifest.json are written into the
 * configured output directory, or output_dir if non-NULL/non-empty. */
int fms_scenario_run(const fms_scenario* s, const char* output_dir);

void fms_scenario_free(fms_scenario* s);

/* ---- closed-form helpers ----------------------------------------------- */

/* Omega_eff = Omega_g Omega_e omega_m / (omega_e^2 - omega_m^2), signed. */
int fms_omega_eff(double omega_g_rabi, double omega_e_rabi, double omega_m, double omega_e,
                  double* out);

/* Displacement trajectory alpha(t) of a square drive switched on at t = 0. */
int fms_alpha_trajectory(double t, double omega_e_rabi, double omega_e, double phi_e,
                         double omega_m, double* re, double* im);

/* Resonant coherent-displacement slope d|alpha|/dt = q E r0 / (2 hbar). */
int fms_resonant_slope(double e_field_v_per_m, double mass_kg, double charge_c, double omega_m,
                       double* out);

/* Inverse of the slope relation: E = 2 hbar slope / (q r0). */
int fms_field_from_slope(double slope_per_s, double mass_kg, double charge_c, double omega_m,
                         double* out);

/* Transfer probability of the Rabi lineshape at the given detuning. */
int fms_rabi_lineshape(double omega_eff, double detuning, double duration, double* out);

#ifdef __cplusplus
}
#endif

#endif /* FMS_FMS_H */
