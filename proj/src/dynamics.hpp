#pragma once

// Time-dependent interaction-picture Hamiltonian assembly and Schrodinger
// propagation, with thermal averaging and residual-excitation diagnostics.
//
// Two frames are supported. The bare frame carries the gradient and electric
// drive terms explicitly. The displaced frame absorbs the electric drive
// into its exact displacement propagator and keeps the gradient plus the
// classical-displacement coupling; spin observables are identical in both
// frames, while the motional excursion stays small.

#include <vector>

#include "drives.hpp"
#include "effective.hpp"
#include "statespace.hpp"

namespace fms {

enum class Frame { bare, displaced };

SparseOperator hamiltonian_at(double t, const PulseSequence& seq, const FockSpace& space);

struct EvolveResult {
    std::vector<SpinMotionState> samples;
    SpinMotionState final_state;
    double max_norm_drift = 0.0;
    double max_top_fock = 0.0;
    bool truncation_ok = true;

    bool valid() const { return truncation_ok; }
};

EvolveResult evolve(const SpinMotionState& initial, const PulseSequence& seq,
                    const IntegratorConfig& cfg, const std::vector<double>& sample_times,
                    const FockSpace& space, Frame frame = Frame::bare);

struct ThermalFlipResult {
    double population_error = 1.0;  // 1 - sum p_n P(flip | n)
    double overlap_error = 1.0;     // 1 - sum p_n |<target|psi>|^2
    double renormalization_correction = 0.0;
    bool valid = false;
    double max_top_fock = 0.0;
    std::vector<double> flip_probability;  // per retained Fock level
};

// Weighted incoherent average over Fock initial states |up>|n>, evolved in
// the bare frame. Sub-runs may execute concurrently; the merge is in fixed
// index order so results are schedule-independent.
ThermalFlipResult thermal_spin_flip_error(const PulseSequence& seq,
                                          const ThermalDistribution& dist,
                                          const FockSpace& space, const IntegratorConfig& cfg,
                                          int threads = 0);

struct ResidualExcitation {
    cplx alpha_res;  // <a> on the motional reduced state
    double delta_n;  // <n> - |<a>|^2
};

ResidualExcitation residual_excitation(const SpinMotionState& state);

}  // namespace fms
