#include "statespace.hpp"

#include <algorithm>
#include <cmath>

namespace fms {

FockSpace::FockSpace(int n_max_, double omega_m_, double mass_, double charge_)
    : n_max(n_max_), omega_m(omega_m_), mass(mass_), charge(charge_) {
    if (n_max < 2) throw DomainError("FockSpace: n_max must be >= 2");
    if (omega_m <= 0.0) throw DomainError("FockSpace: omega_m must be > 0");
    if (mass <= 0.0) throw DomainError("FockSpace: mass must be > 0");
    if (charge <= 0.0) throw DomainError("FockSpace: charge must be > 0");
}

double FockSpace::r0() const {
    return std::sqrt(constants::hbar / (2.0 * mass * omega_m));
}

SpinMotionState SpinMotionState::fock(int n_max, bool spin_up, int n) {
    if (n < 0 || n >= n_max) throw DomainError("SpinMotionState::fock: n out of range");
    SpinMotionState s(n_max);
    s.at(spin_up, n) = 1.0;
    return s;
}

SpinMotionState SpinMotionState::coherent(int n_max, bool spin_up, cplx alpha) {
    SpinMotionState s(n_max);
    cplx c = 1.0;  // alpha^n / sqrt(n!) built up iteratively
    for (int n = 0; n < n_max; ++n) {
        s.at(spin_up, n) = c;
        c *= alpha / std::sqrt(double(n + 1));
    }
    s.normalize();
    return s;
}

double SpinMotionState::norm() const {
    double s = 0.0;
    for (const auto& z : amp) s += std::norm(z);
    return std::sqrt(s);
}

void SpinMotionState::normalize() {
    double n = norm();
    if (n == 0.0) throw DomainError("SpinMotionState::normalize: zero state");
    for (auto& z : amp) z /= n;
}

double SpinMotionState::top_fock_population() const {
    return std::norm(amp[n_max - 1]) + std::norm(amp[2 * n_max - 1]);
}

double SpinMotionState::spin_up_population() const {
    double s = 0.0;
    for (int n = 0; n < n_max; ++n) s += std::norm(amp[n_max + n]);
    return s;
}

double SpinMotionState::spin_down_population() const {
    double s = 0.0;
    for (int n = 0; n < n_max; ++n) s += std::norm(amp[n]);
    return s;
}

double state_distance(const SpinMotionState& a, const SpinMotionState& b) {
    if (a.n_max != b.n_max) throw UsageError("state_distance: dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.amp.size(); ++i) s += std::norm(a.amp[i] - b.amp[i]);
    return std::sqrt(s);
}

cplx inner_product(const SpinMotionState& a, const SpinMotionState& b) {
    if (a.n_max != b.n_max) throw UsageError("inner_product: dimension mismatch");
    cplx s = 0.0;
    for (size_t i = 0; i < a.amp.size(); ++i) s += std::conj(a.amp[i]) * b.amp[i];
    return s;
}

void SparseOperator::apply(const std::vector<cplx>& x, std::vector<cplx>& y) const {
    if (int(x.size()) != dimension) throw UsageError("SparseOperator::apply: dimension mismatch");
    y.assign(dimension, cplx(0.0));
    for (const auto& e : entries) y[e.row] += e.value * x[e.col];
}

SparseOperator SparseOperator::dagger() const {
    SparseOperator d;
    d.dimension = dimension;
    d.hermitian_flag = hermitian_flag;
    d.entries.reserve(entries.size());
    for (const auto& e : entries) d.entries.push_back({e.col, e.row, std::conj(e.value)});
    return d;
}

bool SparseOperator::conjugate_symmetric() const {
    auto sorted = [](std::vector<Entry> v) {
        std::sort(v.begin(), v.end(), [](const Entry& a, const Entry& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        return v;
    };
    auto lhs = sorted(entries);
    auto rhs = sorted(dagger().entries);
    if (lhs.size() != rhs.size()) return false;
    for (size_t i = 0; i < lhs.size(); ++i) {
        if (lhs[i].row != rhs[i].row || lhs[i].col != rhs[i].col) return false;
        if (lhs[i].value != rhs[i].value) return false;
    }
    return true;
}

SparseOperator& SparseOperator::add(int row, int col, cplx value) {
    entries.push_back({row, col, value});
    return *this;
}

SparseOperator SparseOperator::sum(const SparseOperator& a, const SparseOperator& b) {
    if (a.dimension != b.dimension) throw UsageError("SparseOperator::sum: dimension mismatch");
    SparseOperator s;
    s.dimension = a.dimension;
    s.hermitian_flag = a.hermitian_flag && b.hermitian_flag;
    s.entries = a.entries;
    s.entries.insert(s.entries.end(), b.entries.begin(), b.entries.end());
    return s;
}

OperatorSet build_operators(const FockSpace& space) {
    const int N = space.n_max;
    const int dim = 2 * N;
    OperatorSet ops;

    auto init = [dim](SparseOperator& op, bool herm) {
        op.dimension = dim;
        op.hermitian_flag = herm;
    };
    init(ops.a, false);
    init(ops.a_dag, false);
    init(ops.n_hat, true);
    init(ops.sigma_x, true);
    init(ops.sigma_y, true);
    init(ops.sigma_z, true);
    init(ops.sigma_plus, false);
    init(ops.sigma_minus, false);
    init(ops.identity, true);

    for (int s = 0; s < 2; ++s) {
        const int off = s * N;
        for (int n = 1; n < N; ++n)
            ops.a.add(off + n - 1, off + n, std::sqrt(double(n)));
        for (int n = 0; n + 1 < N; ++n)
            ops.a_dag.add(off + n + 1, off + n, std::sqrt(double(n + 1)));
        for (int n = 1; n < N; ++n)
            ops.n_hat.add(off + n, off + n, double(n));
    }
    for (int n = 0; n < N; ++n) {
        ops.sigma_plus.add(N + n, n, 1.0);
        ops.sigma_minus.add(n, N + n, 1.0);
        ops.sigma_x.add(N + n, n, 1.0);
        ops.sigma_x.add(n, N + n, 1.0);
        ops.sigma_y.add(N + n, n, cplx(0.0, -1.0));
        ops.sigma_y.add(n, N + n, cplx(0.0, 1.0));
        ops.sigma_z.add(n, n, -1.0);
        ops.sigma_z.add(N + n, N + n, 1.0);
        ops.identity.add(n, n, 1.0);
        ops.identity.add(N + n, N + n, 1.0);
    }
    return ops;
}

ThermalDistribution thermal_weights(double nbar, int n_cut) {
    if (nbar < 0.0) throw DomainError("thermal_weights: nbar must be >= 0");
    if (n_cut < 0) throw DomainError("thermal_weights: n_cut must be >= 0");
    ThermalDistribution d;
    d.nbar = nbar;
    d.weights.resize(n_cut + 1);
    if (nbar == 0.0) {
        d.weights[0] = 1.0;
        for (int n = 1; n <= n_cut; ++n) d.weights[n] = 0.0;
        d.tail_mass = 0.0;
        return d;
    }
    const double q = nbar / (nbar + 1.0);
    double p = 1.0 / (nbar + 1.0);
    for (int n = 0; n <= n_cut; ++n) {
        d.weights[n] = p;
        p *= q;
    }
    d.tail_mass = std::pow(q, n_cut + 1);  // geometric remainder, exact
    return d;
}

cplx expectation(const SpinMotionState& state, const SparseOperator& op) {
    if (state.dim() != op.dimension) throw UsageError("expectation: dimension mismatch");
    cplx s = 0.0;
    for (const auto& e : op.entries)
        s += std::conj(state.amp[e.row]) * e.value * state.amp[e.col];
    return s;
}

}  // namespace fms
