#pragma once

// Drive parameterization: gradient and electric drives with pulse envelopes,
// grouped into a PulseSequence. All frequencies are angular (rad/s), all
// times seconds. Phases follow cos(omega_e t + phi_e) with t measured from
// sequence start; the gradient phase is fixed to zero.

#include <vector>

#include "errors.hpp"

namespace fms {

enum class EnvelopeShape { square, sin2_ramp };

struct Envelope {
    EnvelopeShape shape = EnvelopeShape::square;
    double ramp_duration = 0.0;     // tau_r, each edge (sin2_ramp only)
    double plateau_duration = 0.0;  // time at unit amplitude
    double start_time = 0.0;

    // sin^2(pi t'/(2 tau_r)) rising edge, 1 on the plateau, mirrored falling
    // edge; square is 1 on [start, start+plateau).
    double value(double t) const;
    double end_time() const;
    double ramp_end() const { return start_time + (shape == EnvelopeShape::sin2_ramp ? ramp_duration : 0.0); }
    void validate() const;
};

enum class SpinAxis { x, y, z };

struct GradientDrive {
    double omega_g_rabi = 0.0;  // Omega_g, rad/s
    double delta = 0.0;         // gradient detuning from the qubit, rad/s (signed)
    SpinAxis spin_axis = SpinAxis::x;
    double t_on = 0.0;  // square window
    double t_off = 0.0;

    void validate() const;
};

struct ElectricDrive {
    double omega_e_rabi = 0.0;  // Omega_e = q E r0 / hbar, rad/s
    double omega_e = 0.0;       // drive frequency, rad/s
    double phi_e = 0.0;         // radians
    Envelope envelope;

    void validate() const;
};

struct PulseSequence {
    std::vector<ElectricDrive> electric;
    std::vector<GradientDrive> gradient;
    double total_duration = 0.0;
    // Protocol check: gradient windows start only after the first electric
    // envelope's rising ramp has completed. Set to bypass.
    bool allow_early_gradient = false;

    void validate() const;
    // max(omega_m, omega_e, |delta|, omega_e + omega_m) / 2pi over all drives, Hz.
    double max_frequency_hz(double omega_m) const;
};

enum class IntegratorMethod { rk4_fixed, midpoint_exponential, cf4_exponential };

struct IntegratorConfig {
    double dt = 1e-9;
    IntegratorMethod method = IntegratorMethod::cf4_exponential;
    int norm_check_every = 1000;

    // dt * max_frequency <= 0.02, validated at run start.
    void validate(double max_frequency_hz) const;
};

}  // namespace fms
