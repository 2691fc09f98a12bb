#pragma once

// Closed-form layer: effective Rabi frequency, displacement trajectory
// alpha(t) of the driven motion, the displaced-frame Hamiltonian, the
// effective single-qubit rotation, the Rabi lineshape and the coherent
// two-mode detuning response.

#include <array>
#include <complex>
#include <vector>

#include "drives.hpp"
#include "statespace.hpp"

namespace fms {

// Gradient drive branch: delta = +omega_e (plus) or delta = -omega_e (minus).
enum class Branch { plus, minus };

struct EffectiveRotation {
    double omega_eff = 0.0;   // signed, rad/s
    double axis_angle = 0.0;  // equator angle of the rotation axis, (-pi, pi]
    Branch branch = Branch::plus;
};

// Omega_eff = Omega_g Omega_e omega_m / (omega_e^2 - omega_m^2), signed.
// Throws ResonanceError at |omega_e| == |omega_m|.
double omega_eff(double omega_g_rabi, double omega_e_rabi, double omega_m, double omega_e);

EffectiveRotation effective_rotation(double omega_g_rabi, double omega_e_rabi, double omega_m,
                                     double omega_e, double phi_e, Branch branch);

// alpha(t) for a single square drive switched on at t = 0, both the
// (omega_e - omega_m) and (omega_e + omega_m) terms. Throws ResonanceError
// at exact resonance; the resonant slope is qEr0/(2 hbar).
cplx alpha_trajectory(double t, double omega_e_rabi, double omega_e, double phi_e,
                      double omega_m, bool include_fast_term = true);

// Displacement amplitude accumulated by every electric drive in the sequence
// up to time t. Square and sin^2-ramped envelopes are handled in closed form
// (a sin^2 edge is a three-tone exponential sum). Regular at resonance.
cplx alpha_for_sequence(double t, const PulseSequence& seq, double omega_m);

// Scalar Magnus phase gamma(t) of the drive propagator U_e = e^{i gamma} D(alpha)
// for a single square drive (window [start, start+plateau], phases in absolute
// time). Needed to map displaced-frame states back to the bare frame.
double magnus_phase(double t, double omega_e_rabi, double omega_e, double phi_e,
                    double omega_m, double window_start, double window_end);

// d|alpha|/dt at resonance: q E r0 / (2 hbar).
double resonant_slope(double e_field, const FockSpace& space);

// 2x2 complex matrix in the (|down>, |up>) basis, row-major.
using Mat2 = std::array<cplx, 4>;

Mat2 mat2_mul(const Mat2& a, const Mat2& b);

// exp(-i (omega_eff * duration / 2)(cos(phi_e) sigma_x -/+ sin(phi_e) sigma_y)),
// upper sign for branch plus.
Mat2 effective_unitary(double phi_e, double duration, double omega_eff, Branch branch);

// Equator angle of the rotation axis of a (near-)unitary 2x2 with positive
// rotation angle convention.
double axis_angle_from_unitary(const Mat2& u);

// Displaced-frame Hamiltonian H_I(t) (units of rad/s) on the composite space:
// the gradient spin(x)motion term plus the gradient coupled to the classical
// displacement trajectory of all electric drives.
SparseOperator transformed_hamiltonian(double t, const PulseSequence& seq, const FockSpace& space);

// P = Omega^2/(Omega^2 + Delta^2) sin^2( sqrt(Omega^2 + Delta^2) T / 2 ).
double rabi_lineshape(double omega_eff, double detuning, double duration);

struct ModeResponse {
    struct Mode {
        double omega_m;           // rad/s
        double coupling_product;  // Omega_g * Omega_e for that mode, rad^2/s^2
    };
    std::vector<Mode> modes;  // frequencies strictly increasing

    void validate() const;
};

// Signed coherent sum over modes: sum_k c_k omega_k / (omega_e^2 - omega_k^2).
double two_mode_response(double omega_e, const ModeResponse& response);

// e^{i phase} D(alpha) applied per spin block (exactly unitary on the
// truncated space).
SpinMotionState apply_displacement(const SpinMotionState& state, cplx alpha, double phase = 0.0);

}  // namespace fms
