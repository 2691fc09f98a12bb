#include "dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

#include "constants.hpp"

namespace fms {

namespace {

const cplx I(0.0, 1.0);

// Coefficients of the fixed operator archetypes making up H(t). Hermitian
// partners (sigma_- terms, a^dag terms) always carry the exact conjugates.
struct HCoeffs {
    cplx sp_a = 0.0;   // sigma_+ (x) a
    cplx sp_ad = 0.0;  // sigma_+ (x) a_dag
    cplx id_a = 0.0;   // 1 (x) a
    cplx z_a = 0.0;    // sigma_z (x) a
    cplx sp_id = 0.0;  // sigma_+ (x) 1
    double z_id = 0.0; // sigma_z (x) 1

    HCoeffs& axpy(double w, const HCoeffs& o) {
        sp_a += w * o.sp_a;
        sp_ad += w * o.sp_ad;
        id_a += w * o.id_a;
        z_a += w * o.z_a;
        sp_id += w * o.sp_id;
        z_id += w * o.z_id;
        return *this;
    }
};

class HamiltonianEngine {
public:
    HamiltonianEngine(const PulseSequence& seq, const FockSpace& space, Frame frame)
        : seq_(seq), space_(space), frame_(frame), n_max_(space.n_max) {
        sqrtn_.resize(n_max_ + 1);
        for (int n = 0; n <= n_max_; ++n) sqrtn_[n] = std::sqrt(double(n));
    }

    void coeffs(double t, HCoeffs& c) const {
        c = HCoeffs{};
        const double wm = space_.omega_m;
        const cplx em = std::exp(-I * wm * t);   // e^{-i omega_m t}
        const cplx ep = std::conj(em);

        double s_shift = 0.0;
        if (frame_ == Frame::displaced)
            s_shift = 2.0 * std::real(alpha_for_sequence(t, seq_, wm) * em);

        for (const auto& g : seq_.gradient) {
            if (t < g.t_on || t >= g.t_off) continue;
            if (g.spin_axis == SpinAxis::z) {
                const double cg = g.omega_g_rabi * std::cos(g.delta * t);
                c.z_a += cg * em;
                if (frame_ == Frame::displaced) c.z_id += cg * s_shift;
                continue;
            }
            const cplx axis_factor = (g.spin_axis == SpinAxis::x) ? cplx(1.0, 0.0) : -I;
            const cplx base = (g.omega_g_rabi / 2.0) * axis_factor * std::exp(-I * g.delta * t);
            c.sp_a += base * em;
            c.sp_ad += base * ep;
            if (frame_ == Frame::displaced) c.sp_id += base * s_shift;
        }
        if (frame_ == Frame::bare) {
            for (const auto& e : seq_.electric) {
                const double env = e.envelope.value(t);
                if (env == 0.0) continue;
                const double ce = e.omega_e_rabi * env * std::cos(e.omega_e * t + e.phi_e);
                c.id_a += ce * em;
            }
        }
    }

    // y = H x (rad/s units)
    void apply(const HCoeffs& c, const std::vector<cplx>& x, std::vector<cplx>& y) const {
        const int N = n_max_;
        std::fill(y.begin(), y.end(), cplx(0.0));
        const double* s = sqrtn_.data();

        if (c.sp_a != 0.0) {
            const cplx v = c.sp_a, vc = std::conj(c.sp_a);
            for (int n = 1; n < N; ++n) y[N + n - 1] += v * s[n] * x[n];
            for (int n = 1; n < N; ++n) y[n] += vc * s[n] * x[N + n - 1];
        }
        if (c.sp_ad != 0.0) {
            const cplx v = c.sp_ad, vc = std::conj(c.sp_ad);
            for (int n = 0; n + 1 < N; ++n) y[N + n + 1] += v * s[n + 1] * x[n];
            for (int n = 0; n + 1 < N; ++n) y[n] += vc * s[n + 1] * x[N + n + 1];
        }
        if (c.id_a != 0.0) {
            const cplx v = c.id_a, vc = std::conj(c.id_a);
            for (int off = 0; off < 2 * N; off += N) {
                for (int n = 1; n < N; ++n) y[off + n - 1] += v * s[n] * x[off + n];
                for (int n = 0; n + 1 < N; ++n) y[off + n + 1] += vc * s[n + 1] * x[off + n];
            }
        }
        if (c.z_a != 0.0) {
            const cplx v = c.z_a, vc = std::conj(c.z_a);
            for (int off = 0; off < 2 * N; off += N) {
                const double sgn = (off == 0) ? -1.0 : 1.0;
                for (int n = 1; n < N; ++n) y[off + n - 1] += sgn * v * s[n] * x[off + n];
                for (int n = 0; n + 1 < N; ++n) y[off + n + 1] += sgn * vc * s[n + 1] * x[off + n];
            }
        }
        if (c.sp_id != 0.0) {
            const cplx v = c.sp_id, vc = std::conj(c.sp_id);
            for (int n = 0; n < N; ++n) y[N + n] += v * x[n];
            for (int n = 0; n < N; ++n) y[n] += vc * x[N + n];
        }
        if (c.z_id != 0.0) {
            for (int n = 0; n < N; ++n) y[n] -= c.z_id * x[n];
            for (int n = 0; n < N; ++n) y[N + n] += c.z_id * x[N + n];
        }
    }

    double coeff_bound(const HCoeffs& c) const {
        const double ladder = std::abs(c.sp_a) + std::abs(c.sp_ad) + std::abs(c.id_a) +
                              std::abs(c.z_a);
        return 2.0 * ladder * sqrtn_[n_max_] + 2.0 * std::abs(c.sp_id) + std::abs(c.z_id);
    }

    SparseOperator to_sparse(const HCoeffs& c) const {
        const int N = n_max_;
        SparseOperator h;
        h.dimension = 2 * N;
        h.hermitian_flag = true;
        auto pair = [&h](int r, int col, cplx v) {
            h.add(r, col, v);
            h.add(col, r, std::conj(v));
        };
        if (c.sp_a != 0.0)
            for (int n = 1; n < N; ++n) pair(N + n - 1, n, c.sp_a * sqrtn_[n]);
        if (c.sp_ad != 0.0)
            for (int n = 0; n + 1 < N; ++n) pair(N + n + 1, n, c.sp_ad * sqrtn_[n + 1]);
        if (c.id_a != 0.0)
            for (int off = 0; off < 2 * N; off += N)
                for (int n = 1; n < N; ++n) pair(off + n - 1, off + n, c.id_a * sqrtn_[n]);
        if (c.z_a != 0.0)
            for (int off = 0; off < 2 * N; off += N) {
                const double sgn = (off == 0) ? -1.0 : 1.0;
                for (int n = 1; n < N; ++n) pair(off + n - 1, off + n, sgn * c.z_a * sqrtn_[n]);
            }
        if (c.sp_id != 0.0)
            for (int n = 0; n < N; ++n) pair(N + n, n, c.sp_id);
        if (c.z_id != 0.0)
            for (int n = 0; n < N; ++n) {
                h.add(n, n, -c.z_id);
                h.add(N + n, N + n, c.z_id);
            }
        return h;
    }

    int n_max() const { return n_max_; }

private:
    PulseSequence seq_;
    FockSpace space_;
    Frame frame_;
    int n_max_;
    std::vector<double> sqrtn_;
};

class Propagator {
public:
    Propagator(const HamiltonianEngine& eng, IntegratorMethod method)
        : eng_(eng), method_(method) {
        const size_t dim = 2 * size_t(eng.n_max());
        v_.resize(dim);
        w_.resize(dim);
        acc_.resize(dim);
        k1_.resize(dim);
        k2_.resize(dim);
        k3_.resize(dim);
        xt_.resize(dim);
    }

    void step(double t, double h, std::vector<cplx>& x) {
        switch (method_) {
            case IntegratorMethod::midpoint_exponential: {
                HCoeffs c;
                eng_.coeffs(t + 0.5 * h, c);
                exp_apply(c, h, x);
                return;
            }
            case IntegratorMethod::cf4_exponential: {
                // two-node commutator-free Magnus, Gauss nodes
                static const double root3 = std::sqrt(3.0);
                const double c1 = 0.5 - root3 / 6.0, c2 = 0.5 + root3 / 6.0;
                const double x1 = (3.0 - 2.0 * root3) / 12.0, x2 = (3.0 + 2.0 * root3) / 12.0;
                HCoeffs h1, h2;
                eng_.coeffs(t + c1 * h, h1);
                eng_.coeffs(t + c2 * h, h2);
                HCoeffs first, second;  // first acts first
                first.axpy(x2, h1).axpy(x1, h2);
                second.axpy(x1, h1).axpy(x2, h2);
                exp_apply(first, h, x);
                exp_apply(second, h, x);
                return;
            }
            case IntegratorMethod::rk4_fixed: {
                HCoeffs ca, cm, cb;
                eng_.coeffs(t, ca);
                eng_.coeffs(t + 0.5 * h, cm);
                // right endpoint nudged inward: drive windows are half-open,
                // and the step never straddles a discontinuity
                eng_.coeffs(t + h * (1.0 - 1e-9), cb);
                const size_t dim = x.size();
                eng_.apply(ca, x, k1_);  // k1 = -i H x (the -i folded in below)
                for (size_t i = 0; i < dim; ++i) xt_[i] = x[i] + (-I) * (0.5 * h) * k1_[i];
                eng_.apply(cm, xt_, k2_);
                for (size_t i = 0; i < dim; ++i) xt_[i] = x[i] + (-I) * (0.5 * h) * k2_[i];
                eng_.apply(cm, xt_, k3_);
                for (size_t i = 0; i < dim; ++i) xt_[i] = x[i] + (-I) * h * k3_[i];
                eng_.apply(cb, xt_, w_);  // k4
                for (size_t i = 0; i < dim; ++i)
                    x[i] += (-I) * (h / 6.0) * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + w_[i]);
                return;
            }
        }
    }

private:
    // x <- exp(-i h H_c) x via scaled Taylor action
    void exp_apply(const HCoeffs& c, double h, std::vector<cplx>& x) {
        const double bound = std::abs(h) * eng_.coeff_bound(c);
        const int substeps = std::max(1, int(std::ceil(bound / 0.5)));
        const cplx factor = -I * h;
        for (int sub = 0; sub < substeps; ++sub) {
            acc_ = x;
            v_ = x;
            double acc_norm2 = 0.0;
            for (const auto& z : acc_) acc_norm2 += std::norm(z);
            for (int k = 1; k <= 96; ++k) {
                eng_.apply(c, v_, w_);
                const cplx scale = factor / (double(k) * substeps);
                double vn = 0.0;
                for (size_t i = 0; i < v_.size(); ++i) {
                    v_[i] = scale * w_[i];
                    acc_[i] += v_[i];
                    vn += std::norm(v_[i]);
                }
                if (vn <= 1e-32 * acc_norm2) break;
            }
            x = acc_;
        }
    }

    const HamiltonianEngine& eng_;
    IntegratorMethod method_;
    std::vector<cplx> v_, w_, acc_, k1_, k2_, k3_, xt_;
};

constexpr double kTopFockLimit = 1e-8;
constexpr double kNormFailLimit = 1e-6;

}  // namespace

SparseOperator hamiltonian_at(double t, const PulseSequence& seq, const FockSpace& space) {
    seq.validate();
    if (t < 0.0 || t > seq.total_duration)
        throw DomainError("hamiltonian_at: t outside the sequence");
    HamiltonianEngine eng(seq, space, Frame::bare);
    HCoeffs c;
    eng.coeffs(t, c);
    return eng.to_sparse(c);
}

EvolveResult evolve(const SpinMotionState& initial, const PulseSequence& seq,
                    const IntegratorConfig& cfg, const std::vector<double>& sample_times,
                    const FockSpace& space, Frame frame) {
    seq.validate();
    cfg.validate(seq.max_frequency_hz(space.omega_m));
    if (initial.n_max != space.n_max) throw UsageError("evolve: state/space dimension mismatch");
    if (std::abs(initial.norm() - 1.0) > 1e-9)
        throw UsageError("evolve: initial state must be normalized");
    for (size_t i = 0; i < sample_times.size(); ++i) {
        if (sample_times[i] < 0.0 || sample_times[i] > seq.total_duration)
            throw DomainError("evolve: sample time outside the sequence");
        if (i > 0 && sample_times[i] < sample_times[i - 1])
            throw DomainError("evolve: sample times must be non-decreasing");
    }

    HamiltonianEngine eng(seq, space, frame);
    Propagator prop(eng, cfg.method);

    // drive discontinuities (window edges, envelope corners); steps never
    // straddle one, so the piecewise-smooth coefficients stay smooth inside
    // every step
    std::vector<double> breaks;
    for (const auto& e : seq.electric) {
        breaks.push_back(e.envelope.start_time);
        breaks.push_back(e.envelope.ramp_end());
        breaks.push_back(e.envelope.end_time() -
                         (e.envelope.shape == EnvelopeShape::sin2_ramp
                              ? e.envelope.ramp_duration
                              : 0.0));
        breaks.push_back(e.envelope.end_time());
    }
    for (const auto& g : seq.gradient) {
        breaks.push_back(g.t_on);
        breaks.push_back(g.t_off);
    }
    std::sort(breaks.begin(), breaks.end());

    EvolveResult res;
    res.samples.reserve(sample_times.size());

    SpinMotionState state = initial;
    double t = 0.0;
    long steps_done = 0;

    auto check_state = [&](bool is_sample) {
        const double drift = std::abs(state.norm() - 1.0);
        res.max_norm_drift = std::max(res.max_norm_drift, drift);
        if (drift > kNormFailLimit)
            throw NumericError("evolve: norm drift beyond 1e-6; integrator failure");
        const double top = state.top_fock_population();
        res.max_top_fock = std::max(res.max_top_fock, top);
        if (is_sample && top >= kTopFockLimit) res.truncation_ok = false;
    };

    auto advance_segment = [&](double target) {
        const double span = target - t;
        if (span <= 0.0) return;
        const long n = std::max(1L, long(std::ceil(span / cfg.dt - 1e-12)));
        const double h = span / double(n);
        for (long k = 0; k < n; ++k) {
            prop.step(t + k * h, h, state.amp);
            if (++steps_done % cfg.norm_check_every == 0) check_state(false);
        }
        t = target;
    };

    auto advance_to = [&](double target) {
        for (double b : breaks) {
            if (b > t && b < target) advance_segment(b);
        }
        advance_segment(target);
    };

    for (double ts : sample_times) {
        advance_to(ts);
        check_state(true);
        res.samples.push_back(state);
    }
    advance_to(seq.total_duration);
    check_state(true);
    res.final_state = std::move(state);
    return res;
}

ThermalFlipResult thermal_spin_flip_error(const PulseSequence& seq,
                                          const ThermalDistribution& dist,
                                          const FockSpace& space, const IntegratorConfig& cfg,
                                          int threads) {
    if (dist.tail_mass >= 1e-6)
        throw DomainError("thermal_spin_flip_error: distribution tail_mass must be < 1e-6");
    const int n_count = int(dist.weights.size());
    if (n_count > space.n_max)
        throw UsageError("thermal_spin_flip_error: distribution longer than the Fock space");

    // effective-model target for the overlap diagnostic (first drive pair)
    Mat2 u_eff{1.0, 0.0, 0.0, 1.0};
    cplx alpha_final = 0.0;
    double gamma_final = 0.0;
    if (!seq.gradient.empty() && !seq.electric.empty()) {
        const auto& g = seq.gradient.front();
        const auto& e = seq.electric.front();
        const Branch branch = g.delta >= 0.0 ? Branch::plus : Branch::minus;
        const double w_eff =
            omega_eff(g.omega_g_rabi, e.omega_e_rabi, space.omega_m, e.omega_e);
        u_eff = effective_unitary(e.phi_e, g.t_off - g.t_on, w_eff, branch);
        if (e.envelope.shape == EnvelopeShape::square) {
            alpha_final = alpha_for_sequence(seq.total_duration, seq, space.omega_m);
            gamma_final = magnus_phase(seq.total_duration, e.omega_e_rabi, e.omega_e, e.phi_e,
                                       space.omega_m, e.envelope.start_time,
                                       e.envelope.end_time());
        }
    }

    struct SubRun {
        double flip = 0.0;
        double overlap = 0.0;
        double top_fock = 0.0;
        bool truncation_ok = true;
    };

    auto run_one = [&](int n) {
        const SpinMotionState init = SpinMotionState::fock(space.n_max, true, n);
        EvolveResult ev = evolve(init, seq, cfg, {}, space, Frame::bare);
        SubRun r;
        r.flip = ev.final_state.spin_down_population();
        r.top_fock = ev.max_top_fock;
        r.truncation_ok = ev.truncation_ok;
        // ideal: effective rotation on the spin, drive displacement on the motion
        SpinMotionState target(space.n_max);
        target.at(false, n) = u_eff[0 * 2 + 1];  // <down|U|up>
        target.at(true, n) = u_eff[1 * 2 + 1];
        target = apply_displacement(target, alpha_final, gamma_final);
        r.overlap = std::norm(inner_product(target, ev.final_state));
        return r;
    };

    std::vector<SubRun> results(n_count);
    int hw = threads > 0 ? threads : int(std::thread::hardware_concurrency());
    hw = std::max(1, std::min(hw, n_count));
    if (hw == 1) {
        for (int n = 0; n < n_count; ++n) results[n] = run_one(n);
    } else {
        std::vector<std::future<SubRun>> futs(n_count);
        // simple index-striped pool; merge order below is fixed by index
        std::vector<std::thread> pool;
        std::vector<std::promise<SubRun>> promises(n_count);
        for (int n = 0; n < n_count; ++n) futs[n] = promises[n].get_future();
        for (int w = 0; w < hw; ++w) {
            pool.emplace_back([&, w]() {
                for (int n = w; n < n_count; n += hw) {
                    try {
                        promises[n].set_value(run_one(n));
                    } catch (...) {
                        promises[n].set_exception(std::current_exception());
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        for (int n = 0; n < n_count; ++n) results[n] = futs[n].get();
    }

    double wsum = 0.0;
    for (double w : dist.weights) wsum += w;

    ThermalFlipResult out;
    out.renormalization_correction = dist.tail_mass;
    out.valid = true;
    out.flip_probability.resize(n_count);
    double flip_acc = 0.0, overlap_acc = 0.0;
    for (int n = 0; n < n_count; ++n) {
        const double w = dist.weights[n] / wsum;
        out.flip_probability[n] = results[n].flip;
        flip_acc += w * results[n].flip;
        overlap_acc += w * results[n].overlap;
        out.max_top_fock = std::max(out.max_top_fock, results[n].top_fock);
        if (!results[n].truncation_ok) out.valid = false;
    }
    out.population_error = 1.0 - flip_acc;
    out.overlap_error = 1.0 - overlap_acc;
    return out;
}

ResidualExcitation residual_excitation(const SpinMotionState& state) {
    const int N = state.n_max;
    cplx a_exp = 0.0;
    double n_exp = 0.0;
    for (int off = 0; off < 2 * N; off += N) {
        for (int n = 1; n < N; ++n) {
            a_exp += std::conj(state.amp[off + n - 1]) * std::sqrt(double(n)) *
                     state.amp[off + n];
            n_exp += double(n) * std::norm(state.amp[off + n]);
        }
    }
    return {a_exp, n_exp - std::norm(a_exp)};
}

}  // namespace fms
