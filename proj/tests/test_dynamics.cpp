#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "constants.hpp"
#include "dynamics.hpp"

using namespace fms;
using constants::two_pi;
using constants::pi;

namespace {

FockSpace ca40_space(int n_max, double f_mhz = 2.6) {
    return FockSpace(n_max, two_pi * f_mhz * 1e6, constants::ca40_mass_amu * constants::amu,
                     constants::elementary_charge);
}

PulseSequence electric_only(double rabi, double omega_e, double phi, double duration) {
    PulseSequence seq;
    seq.electric.push_back({rabi, omega_e, phi, Envelope{EnvelopeShape::square, 0.0, duration, 0.0}});
    seq.total_duration = duration;
    return seq;
}

IntegratorConfig cfg_for(const PulseSequence& seq, double omega_m,
                         IntegratorMethod method = IntegratorMethod::cf4_exponential) {
    IntegratorConfig cfg;
    cfg.method = method;
    cfg.dt = std::min(1e-9, 0.018 / seq.max_frequency_hz(omega_m));
    cfg.norm_check_every = 1000;
    return cfg;
}

}  // namespace

TEST_CASE("hamiltonian_at matches a hand-expanded matrix for the electric term") {
    FockSpace space = ca40_space(3);
    const double rabi = two_pi * 0.4e6;
    const double omega_e = two_pi * 2.5e6;
    const double phi = 0.6;
    PulseSequence seq = electric_only(rabi, omega_e, phi, 10e-6);

    for (double t : {0.0, 1.3e-6, 7.7e-6}) {
        SparseOperator h = hamiltonian_at(t, seq, space);
        CHECK(h.conjugate_symmetric());
        std::vector<std::vector<cplx>> dense(6, std::vector<cplx>(6, 0.0));
        for (const auto& e : h.entries) dense[e.row][e.col] += e.value;

        // oracle: (Omega_e/2)(e^{i(w_e t+phi)} + c.c.)(a e^{-i w_m t} + a^dag e^{i w_m t})
        const cplx I(0.0, 1.0);
        const double drive = rabi * std::cos(omega_e * t + phi);
        const cplx am = drive * std::exp(-I * space.omega_m * t);
        for (int s = 0; s < 2; ++s) {
            const int off = 3 * s;
            std::vector<std::vector<cplx>> want(3, std::vector<cplx>(3, 0.0));
            want[0][1] = am * std::sqrt(1.0);
            want[1][2] = am * std::sqrt(2.0);
            want[1][0] = std::conj(want[0][1]);
            want[2][1] = std::conj(want[1][2]);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    CHECK(std::abs(dense[off + i][off + j] - want[i][j]) <
                          1e-12 * (1.0 + std::abs(want[i][j])));
        }
        // no spin coupling from the electric term
        for (int i = 0; i < 3; ++i)
            for (int j = 3; j < 6; ++j) CHECK(std::abs(dense[i][j]) == 0.0);
    }
}

TEST_CASE("hamiltonian_at is zero before any window and errors outside the sequence") {
    FockSpace space = ca40_space(4);
    PulseSequence seq;
    seq.electric.push_back({two_pi * 0.1e6, two_pi * 2.5e6, 0.0,
                            Envelope{EnvelopeShape::square, 0.0, 4e-6, 3e-6}});
    seq.gradient.push_back({two_pi * 1e3, two_pi * 2.5e6, SpinAxis::x, 3e-6, 7e-6});
    seq.total_duration = 8e-6;
    SparseOperator h = hamiltonian_at(1e-6, seq, space);
    CHECK(h.entries.empty());
    CHECK_THROWS_AS(hamiltonian_at(9e-6, seq, space), DomainError);
    CHECK_THROWS_AS(hamiltonian_at(-1e-9, seq, space), DomainError);
}

TEST_CASE("hamiltonian hermiticity at random times with both drives") {
    FockSpace space = ca40_space(5);
    PulseSequence seq;
    seq.electric.push_back({two_pi * 0.2e6, two_pi * 2.4e6, 1.1,
                            Envelope{EnvelopeShape::square, 0.0, 20e-6, 0.0}});
    seq.gradient.push_back({two_pi * 5e3, two_pi * 2.4e6, SpinAxis::y, 0.0, 20e-6});
    seq.total_duration = 20e-6;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 20e-6);
    for (int k = 0; k < 1000; ++k) {
        CHECK(hamiltonian_at(u(rng), seq, space).conjugate_symmetric());
    }
}

TEST_CASE("protocol check: gradient must wait for the electric ramp") {
    PulseSequence seq;
    seq.electric.push_back({two_pi * 0.1e6, two_pi * 2.5e6, 0.0,
                            Envelope{EnvelopeShape::sin2_ramp, 5e-6, 20e-6, 0.0}});
    seq.gradient.push_back({two_pi * 1e3, two_pi * 2.5e6, SpinAxis::x, 1e-6, 10e-6});
    seq.total_duration = 30e-6;
    CHECK_THROWS_AS(seq.validate(), DomainError);
    seq.allow_early_gradient = true;
    CHECK_NOTHROW(seq.validate());
    seq.allow_early_gradient = false;
    seq.gradient[0].t_on = 5e-6;
    CHECK_NOTHROW(seq.validate());
}

TEST_CASE("integrator config guard") {
    IntegratorConfig cfg;
    cfg.dt = 1e-8;  // too coarse for a 12 MHz drive
    CHECK_THROWS_AS(cfg.validate(12e6), ConfigError);
    cfg.dt = 1e-9;
    CHECK_NOTHROW(cfg.validate(12e6));
}

TEST_CASE("zero drives leave any state untouched") {
    FockSpace space = ca40_space(8);
    PulseSequence seq;
    seq.electric.push_back({0.0, two_pi * 2.5e6, 0.0,
                            Envelope{EnvelopeShape::square, 0.0, 5e-6, 0.0}});
    seq.total_duration = 5e-6;

    SpinMotionState init(space.n_max);
    init.at(false, 2) = cplx(0.6, 0.1);
    init.at(true, 0) = cplx(0.2, -0.7);
    init.normalize();

    for (auto method : {IntegratorMethod::cf4_exponential, IntegratorMethod::midpoint_exponential,
                        IntegratorMethod::rk4_fixed}) {
        EvolveResult ev = evolve(init, seq, cfg_for(seq, space.omega_m, method),
                                 {1e-6, 3e-6}, space);
        CHECK(state_distance(ev.final_state, init) < 1e-12);
        CHECK(state_distance(ev.samples[0], init) < 1e-12);
    }
}

TEST_CASE("electric drive produces the closed-form coherent state") {
    FockSpace space = ca40_space(40);
    const double rabi = two_pi * 0.2e6;
    const double omega_e = two_pi * 2.1e6;  // -500 kHz from the mode
    const double phi = 0.4;
    PulseSequence seq = electric_only(rabi, omega_e, phi, 12e-6);
    EvolveResult ev = evolve(SpinMotionState::fock(space.n_max, true, 0), seq,
                             cfg_for(seq, space.omega_m), {4e-6, 9e-6}, space);
    CHECK(ev.valid());
    CHECK(ev.max_norm_drift < 1e-9);

    const std::vector<double> times{4e-6, 9e-6};
    for (size_t k = 0; k < times.size(); ++k) {
        const cplx alpha = alpha_trajectory(times[k], rabi, omega_e, phi, space.omega_m);
        SpinMotionState target = SpinMotionState::coherent(space.n_max, true, alpha);
        CHECK(std::abs(inner_product(target, ev.samples[k])) > 1.0 - 1e-6);
    }
}

TEST_CASE("norm drift stays below 1e-9 over 1e5 exponential steps") {
    FockSpace space = ca40_space(8);
    PulseSequence seq = electric_only(two_pi * 0.05e6, two_pi * 2.5e6, 0.0, 100e-6);
    seq.gradient.push_back({two_pi * 2e3, two_pi * 2.5e6, SpinAxis::x, 0.0, 100e-6});
    IntegratorConfig cfg{1e-9, IntegratorMethod::cf4_exponential, 1000};
    EvolveResult ev = evolve(SpinMotionState::fock(space.n_max, true, 1), seq, cfg, {}, space);
    CHECK(ev.max_norm_drift < 1e-9);
}

TEST_CASE("integrator convergence orders") {
    // strong, fast-modulated drive on a small space; reference at tiny dt
    FockSpace space = ca40_space(10);
    const double duration = 2e-6;
    PulseSequence seq = electric_only(two_pi * 0.3e6, two_pi * 2.2e6, 0.2, duration);
    seq.gradient.push_back({two_pi * 20e3, two_pi * 2.2e6, SpinAxis::x, 0.0, duration});
    const SpinMotionState init = SpinMotionState::fock(space.n_max, true, 0);

    auto run = [&](IntegratorMethod m, double dt) {
        IntegratorConfig cfg{dt, m, 100000};
        return evolve(init, seq, cfg, {}, space).final_state;
    };
    const SpinMotionState ref = run(IntegratorMethod::cf4_exponential, 0.025e-9);

    auto err = [&](IntegratorMethod m, double dt) { return state_distance(run(m, dt), ref); };

    const double e1 = err(IntegratorMethod::cf4_exponential, 1.6e-9);
    const double e2 = err(IntegratorMethod::cf4_exponential, 0.8e-9);
    CHECK(e1 / e2 > 8.0);  // 4th order: expect ~16

    const double m1 = err(IntegratorMethod::midpoint_exponential, 1.6e-9);
    const double m2 = err(IntegratorMethod::midpoint_exponential, 0.8e-9);
    CHECK(m1 / m2 > 3.0);  // 2nd order: expect ~4
    CHECK(m1 / m2 < 8.0);

    const double r1 = err(IntegratorMethod::rk4_fixed, 1.6e-9);
    const double r2 = err(IntegratorMethod::rk4_fixed, 0.8e-9);
    CHECK(r1 / r2 > 8.0);

    // cf4 beats midpoint at the same step
    CHECK(e1 < m1);
}

TEST_CASE("residual excitation") {
    SUBCASE("vacuum") {
        SpinMotionState up0 = SpinMotionState::fock(10, true, 0);
        ResidualExcitation r = residual_excitation(up0);
        CHECK(std::abs(r.alpha_res) == 0.0);
        CHECK(r.delta_n == 0.0);
    }
    SUBCASE("coherent state moments") {
        SpinMotionState coh = SpinMotionState::coherent(25, false, cplx(0.5, 0.0));
        ResidualExcitation r = residual_excitation(coh);
        CHECK(std::abs(r.alpha_res - cplx(0.5, 0.0)) < 1e-6);
        CHECK(std::abs(r.delta_n) < 1e-6);
    }
    SUBCASE("square pulse at an integer beat period leaves only the fast-term residual") {
        FockSpace space = ca40_space(30);
        const double delta = two_pi * 2e3;
        const double omega_e = space.omega_m + delta;
        const double rabi = two_pi * 1e3;
        const double beat = two_pi / delta;
        PulseSequence seq = electric_only(rabi, omega_e, 0.0, beat);
        EvolveResult ev = evolve(SpinMotionState::fock(space.n_max, true, 0), seq,
                                 cfg_for(seq, space.omega_m), {}, space);
        ResidualExcitation r = residual_excitation(ev.final_state);
        CHECK(std::abs(r.alpha_res) < 1e-3 * rabi / delta);
    }
}

TEST_CASE("truncation flag trips when the drive overfills the Fock space") {
    FockSpace space = ca40_space(6);
    PulseSequence seq = electric_only(two_pi * 50e3, space.omega_m, 0.0, 50e-6);
    EvolveResult ev = evolve(SpinMotionState::fock(space.n_max, true, 0), seq,
                             cfg_for(seq, space.omega_m), {}, space);
    CHECK_FALSE(ev.valid());
    CHECK_FALSE(ev.truncation_ok);
    CHECK(ev.max_top_fock >= 1e-8);
}

TEST_CASE("evolve input validation") {
    FockSpace space = ca40_space(4);
    PulseSequence seq = electric_only(two_pi * 0.01e6, two_pi * 2.5e6, 0.0, 1e-6);
    SpinMotionState bad(space.n_max);
    bad.at(true, 0) = 0.5;  // not normalized
    CHECK_THROWS_AS(evolve(bad, seq, cfg_for(seq, space.omega_m), {}, space), UsageError);

    SpinMotionState ok = SpinMotionState::fock(space.n_max, true, 0);
    CHECK_THROWS_AS(evolve(ok, seq, cfg_for(seq, space.omega_m), {2e-6}, space), DomainError);
    CHECK_THROWS_AS(evolve(ok, seq, cfg_for(seq, space.omega_m), {0.8e-6, 0.2e-6}, space),
                    DomainError);
}

TEST_CASE("thermal spin-flip error") {
    SUBCASE("no gradient, no flip: error 1") {
        FockSpace space = ca40_space(26);
        PulseSequence seq = electric_only(two_pi * 0.05e6, two_pi * 2.4e6, 0.0, 2e-6);
        ThermalDistribution dist = thermal_weights(0.5, 14);  // tail ~ 1e-7 < 1e-6
        ThermalFlipResult res =
            thermal_spin_flip_error(seq, dist, space, cfg_for(seq, space.omega_m), 2);
        CHECK(res.valid);
        CHECK(res.population_error == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(res.renormalization_correction == doctest::Approx(dist.tail_mass));
    }
    SUBCASE("ideal analytic pi rotation gives zero error through the weighting") {
        // oracle short-circuit: substitute the closed-form rotation for numerics
        ThermalDistribution dist = thermal_weights(1.0, 20);
        const double w = two_pi * 5e3;
        Mat2 u = effective_unitary(0.0, pi / w, w, Branch::plus);
        double wsum = 0.0, flip = 0.0;
        for (double p : dist.weights) wsum += p;
        for (double p : dist.weights) flip += (p / wsum) * std::norm(u[1]);
        CHECK(1.0 - flip == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("tail precondition enforced") {
        FockSpace space = ca40_space(16);
        PulseSequence seq = electric_only(two_pi * 0.05e6, two_pi * 2.4e6, 0.0, 2e-6);
        ThermalDistribution dist = thermal_weights(1.0, 4);  // tail 3%
        CHECK_THROWS_AS(
            thermal_spin_flip_error(seq, dist, space, cfg_for(seq, space.omega_m), 1),
            DomainError);
    }
    SUBCASE("threaded and serial runs agree bit-for-bit") {
        FockSpace space = ca40_space(14);
        const double omega_e = two_pi * 2.0e6;
        PulseSequence seq = electric_only(two_pi * 0.1e6, omega_e, 0.3, 4e-6);
        seq.gradient.push_back({two_pi * 10e3, omega_e, SpinAxis::x, 0.0, 4e-6});
        ThermalDistribution dist = thermal_weights(0.3, 12);
        IntegratorConfig cfg = cfg_for(seq, space.omega_m);
        ThermalFlipResult serial = thermal_spin_flip_error(seq, dist, space, cfg, 1);
        ThermalFlipResult threaded = thermal_spin_flip_error(seq, dist, space, cfg, 4);
        CHECK(serial.population_error == threaded.population_error);
        CHECK(serial.overlap_error == threaded.overlap_error);
    }
}

TEST_CASE("shaped electric pulse residual matches a quadrature oracle") {
    FockSpace space = ca40_space(26);
    const double delta = two_pi * 200e3;
    const double omega_e = space.omega_m + delta;
    const double rabi = two_pi * 0.05e6;
    const double tau_r = 50e-6, plateau = 20e-6;
    PulseSequence seq;
    seq.electric.push_back({rabi, omega_e, 0.1, Envelope{EnvelopeShape::sin2_ramp, tau_r, plateau, 0.0}});
    seq.total_duration = 2.0 * tau_r + plateau;

    EvolveResult ev = evolve(SpinMotionState::fock(space.n_max, true, 0), seq,
                             cfg_for(seq, space.omega_m), {}, space);
    CHECK(ev.valid());
    const cplx alpha_num = residual_excitation(ev.final_state).alpha_res;

    // Simpson quadrature of alpha' = -i Omega_e env(t) cos(w_e t + phi) e^{i w_m t}
    const cplx I(0.0, 1.0);
    const Envelope& env = seq.electric[0].envelope;
    const int n = 600001;
    const double h = seq.total_duration / (n - 1);
    auto f = [&](double t) {
        return -I * rabi * env.value(t) * std::cos(omega_e * t + 0.1) *
               std::exp(I * space.omega_m * t);
    };
    cplx acc = f(0.0) + f(seq.total_duration);
    for (int k = 1; k < n - 1; ++k) acc += (k % 2 ? 4.0 : 2.0) * f(k * h);
    const cplx alpha_quad = acc * h / 3.0;

    CHECK(std::abs(alpha_num - alpha_quad) < 2e-6);

    // the closed-form shaped-envelope trajectory agrees with the same oracle
    const cplx alpha_closed = alpha_for_sequence(seq.total_duration, seq, space.omega_m);
    CHECK(std::abs(alpha_closed - alpha_quad) < 1e-9);

    // and at an interior time halfway down the falling edge
    const double t_mid = tau_r + plateau + 0.5 * tau_r;
    cplx acc2 = f(0.0) + f(t_mid);
    const int n2 = 400001;
    const double h2 = t_mid / (n2 - 1);
    acc2 = f(0.0) + f(t_mid);
    for (int k = 1; k < n2 - 1; ++k) acc2 += (k % 2 ? 4.0 : 2.0) * f(k * h2);
    CHECK(std::abs(alpha_for_sequence(t_mid, seq, space.omega_m) - acc2 * h2 / 3.0) < 1e-9);
}

TEST_CASE("frame equivalence on random dispersive parameter sets") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 3; ++trial) {
        const double omega_m = two_pi * (3e6 + 3e6 * u(rng));
        const FockSpace space(30, omega_m, constants::ca40_mass_amu * constants::amu,
                              constants::elementary_charge);
        const double rabi_hz = 5e4 + 1e5 * u(rng);
        const double det = (u(rng) < 0.5 ? -1.0 : 1.0) * (10.0 * rabi_hz + 5e5 * u(rng));
        const double omega_e = omega_m + two_pi * det;
        const double rabi = two_pi * rabi_hz;
        const double phi = two_pi * u(rng);
        const double omega_g = two_pi * (1e3 + 1e4 * u(rng));
        const double duration = 10e-6;

        PulseSequence seq = electric_only(rabi, omega_e, phi, duration);
        seq.gradient.push_back({omega_g, omega_e, SpinAxis::x, 0.0, duration});

        SpinMotionState init(space.n_max);
        init.at(false, 1) = cplx(u(rng) - 0.5, u(rng) - 0.5);
        init.at(true, 1) = cplx(u(rng) - 0.5, u(rng) - 0.5);
        init.normalize();

        IntegratorConfig cfg = cfg_for(seq, omega_m);
        const std::vector<double> times{duration / 3.0, duration};
        EvolveResult full = evolve(init, seq, cfg, times, space, Frame::bare);
        EvolveResult disp = evolve(init, seq, cfg, times, space, Frame::displaced);
        for (size_t k = 0; k < times.size(); ++k) {
            const cplx alpha = alpha_for_sequence(times[k], seq, omega_m);
            const double gamma = magnus_phase(times[k], rabi, omega_e, phi, omega_m, 0.0, duration);
            SpinMotionState mapped = apply_displacement(disp.samples[k], alpha, gamma);
            CHECK(state_distance(full.samples[k], mapped) < 1e-6);
        }
    }
}
