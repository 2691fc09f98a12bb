#pragma once

// Truncated spin (x) motion Hilbert space: states, sparse operators,
// thermal distributions, expectation values.
//
// Basis ordering is spin-major: index = s*n_max + n with s=0 the |down>
// block and s=1 the |up> block, Fock index n minor. sigma_z|up> = +|up>.

#include <complex>
#include <vector>

#include "constants.hpp"
#include "errors.hpp"

namespace fms {

using cplx = std::complex<double>;

struct FockSpace {
    int n_max;       // number of Fock states retained
    double omega_m;  // motional angular frequency, rad/s
    double mass;     // kg
    double charge;   // C

    FockSpace(int n_max_, double omega_m_, double mass_, double charge_);

    // Ground-state extent sqrt(hbar / (2 M omega_m)); recomputed, never stored.
    double r0() const;
    int dim() const { return 2 * n_max; }
};

struct SpinMotionState {
    int n_max = 0;
    std::vector<cplx> amp;  // length 2*n_max, |down> block then |up> block

    SpinMotionState() = default;
    explicit SpinMotionState(int n_max_) : n_max(n_max_), amp(2 * n_max_, cplx(0.0)) {}

    static SpinMotionState fock(int n_max, bool spin_up, int n);
    // Normalized truncated coherent-state expansion on the given spin level.
    static SpinMotionState coherent(int n_max, bool spin_up, cplx alpha);

    int dim() const { return 2 * n_max; }
    double norm() const;
    void normalize();
    // Population on Fock index n_max-1, both spin blocks.
    double top_fock_population() const;
    double spin_up_population() const;
    double spin_down_population() const;

    cplx& at(bool spin_up, int n) { return amp[(spin_up ? n_max : 0) + n]; }
    const cplx& at(bool spin_up, int n) const { return amp[(spin_up ? n_max : 0) + n]; }
};

double state_distance(const SpinMotionState& a, const SpinMotionState& b);
cplx inner_product(const SpinMotionState& a, const SpinMotionState& b);

struct SparseOperator {
    struct Entry {
        int row;
        int col;
        cplx value;
    };

    int dimension = 0;
    std::vector<Entry> entries;
    bool hermitian_flag = false;

    void apply(const std::vector<cplx>& x, std::vector<cplx>& y) const;
    SparseOperator dagger() const;
    // Exact conjugate-symmetry check (bitwise on the values).
    bool conjugate_symmetric() const;

    SparseOperator& add(int row, int col, cplx value);
    static SparseOperator sum(const SparseOperator& a, const SparseOperator& b);
};

// The Eq.-(1) operator alphabet on the composite 2*n_max space. Spin
// operators act as 2x2 blocks tensored with the motional identity; a has
// <n-1|a|n> = sqrt(n) within each spin block.
struct OperatorSet {
    SparseOperator a;
    SparseOperator a_dag;
    SparseOperator n_hat;
    SparseOperator sigma_x;
    SparseOperator sigma_y;
    SparseOperator sigma_z;
    SparseOperator sigma_plus;   // |up><down|
    SparseOperator sigma_minus;  // |down><up|
    SparseOperator identity;
};

OperatorSet build_operators(const FockSpace& space);

struct ThermalDistribution {
    double nbar = 0.0;
    std::vector<double> weights;  // p_n = nbar^n / (nbar+1)^(n+1), n = 0..n_cut
    double tail_mass = 0.0;       // un-truncated remainder, closed form
};

ThermalDistribution thermal_weights(double nbar, int n_cut);

cplx expectation(const SpinMotionState& state, const SparseOperator& op);

}  // namespace fms
