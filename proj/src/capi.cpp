#include "fms/fms.h"

#include <string>

#include "config.hpp"
#include "effective.hpp"
#include "scenario.hpp"
#include "trapmodel.hpp"

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return FMS_OK;
    } catch (const fms::ResonanceError& e) {
        return fail(FMS_ERR_RESONANCE, e.what());
    } catch (const fms::NumericError& e) {
        return fail(FMS_ERR_NUMERIC, e.what());
    } catch (const fms::UsageError& e) {
        return fail(FMS_ERR_USAGE, e.what());
    } catch (const fms::Error& e) {
        // ConfigError and DomainError are both bad-input classes
        return fail(FMS_ERR_CONFIG, e.what());
    } catch (const std::exception& e) {
        return fail(FMS_ERR_INTERNAL, e.what());
    }
}

}  // namespace

struct fms_scenario {
    fms::Scenario scenario;
    std::string name;
};

extern "C" {

const char* fms_version(void) { return fms::kToolkitVersion; }

const char* fms_last_error(void) { return g_last_error.c_str(); }

int fms_scenario_load(const char* path, fms_scenario** out) {
    if (!path || !out) return fail(FMS_ERR_USAGE, "fms_scenario_load: null argument");
    *out = nullptr;
    return guarded([&]() {
        auto* handle = new fms_scenario{fms::parse_config(path), ""};
        handle->name = fms::scenario_kind_name(handle->scenario.kind);
        *out = handle;
    });
}

int fms_scenario_load_string(const char* text, const char* origin, fms_scenario** out) {
    if (!text || !out) return fail(FMS_ERR_USAGE, "fms_scenario_load_string: null argument");
    *out = nullptr;
    return guarded([&]() {
        auto* handle = new fms_scenario{
            fms::parse_config_text(text, origin ? origin : "<string>"), ""};
        handle->name = fms::scenario_kind_name(handle->scenario.kind);
        *out = handle;
    });
}

const char* fms_scenario_name(const fms_scenario* s) { return s ? s->name.c_str() : ""; }

int fms_scenario_run(const fms_scenario* s, const char* output_dir) {
    if (!s) return fail(FMS_ERR_USAGE, "fms_scenario_run: null handle");
    return guarded([&]() {
        fms::run_scenario(s->scenario, output_dir ? std::string(output_dir) : std::string());
    });
}

void fms_scenario_free(fms_scenario* s) { delete s; }

int fms_omega_eff(double omega_g_rabi, double omega_e_rabi, double omega_m, double omega_e,
                  double* out) {
    if (!out) return fail(FMS_ERR_USAGE, "fms_omega_eff: null output");
    return guarded([&]() { *out = fms::omega_eff(omega_g_rabi, omega_e_rabi, omega_m, omega_e); });
}

int fms_alpha_trajectory(double t, double omega_e_rabi, double omega_e, double phi_e,
                         double omega_m, double* re, double* im) {
    if (!re || !im) return fail(FMS_ERR_USAGE, "fms_alpha_trajectory: null output");
    return guarded([&]() {
        const fms::cplx a = fms::alpha_trajectory(t, omega_e_rabi, omega_e, phi_e, omega_m);
        *re = a.real();
        *im = a.imag();
    });
}

int fms_resonant_slope(double e_field_v_per_m, double mass_kg, double charge_c, double omega_m,
                       double* out) {
    if (!out) return fail(FMS_ERR_USAGE, "fms_resonant_slope: null output");
    return guarded([&]() {
        const fms::FockSpace space(2, omega_m, mass_kg, charge_c);
        *out = fms::resonant_slope(e_field_v_per_m, space);
    });
}

int fms_field_from_slope(double slope_per_s, double mass_kg, double charge_c, double omega_m,
                         double* out) {
    if (!out) return fail(FMS_ERR_USAGE, "fms_field_from_slope: null output");
    return guarded([&]() {
        const fms::FockSpace space(2, omega_m, mass_kg, charge_c);
        *out = fms::field_from_slope(slope_per_s, space);
    });
}

int fms_rabi_lineshape(double omega_eff, double detuning, double duration, double* out) {
    if (!out) return fail(FMS_ERR_USAGE, "fms_rabi_lineshape: null output");
    return guarded([&]() { *out = fms::rabi_lineshape(omega_eff, detuning, duration); });
}

}  // extern "C"
