#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "constants.hpp"
#include "effective.hpp"
#include "dynamics.hpp"

using namespace fms;
using constants::two_pi;
using constants::pi;

namespace {

FockSpace ca40_space(int n_max, double f_mhz = 2.6) {
    return FockSpace(n_max, two_pi * f_mhz * 1e6, constants::ca40_mass_amu * constants::amu,
                     constants::elementary_charge);
}

double wrap(double a) {
    a = std::fmod(a, two_pi);
    if (a > pi) a -= two_pi;
    if (a <= -pi) a += two_pi;
    return a;
}

}  // namespace

TEST_CASE("omega_eff closed form") {
    SUBCASE("supplemental benchmark: -4.375 kHz and a 114.3 us pi time") {
        const double w = omega_eff(two_pi * 15e3, two_pi * 1e6, two_pi * 7e6, two_pi * 5e6);
        CHECK(w / two_pi == doctest::Approx(-4375.0).epsilon(1e-12));
        CHECK(pi / std::abs(w) * 1e6 == doctest::Approx(114.2857).epsilon(1e-4));
    }
    SUBCASE("zero electric drive") {
        CHECK(omega_eff(two_pi * 15e3, 0.0, two_pi * 7e6, two_pi * 5e6) == 0.0);
    }
    SUBCASE("main-text constants chain: |Omega_eff|/2pi = 5.1 kHz") {
        FockSpace space = ca40_space(2);
        CHECK(space.r0() == doctest::Approx(6.97e-9).epsilon(2e-3));
        const double omega_e_rabi =
            space.charge * 1.2 * space.r0() / constants::hbar;
        CHECK(omega_e_rabi / two_pi / 1e6 == doctest::Approx(2.02).epsilon(0.01));
        const double w =
            omega_eff(two_pi * 0.5e3, omega_e_rabi, space.omega_m, two_pi * 2.5e6);
        CHECK(std::abs(w) / two_pi == doctest::Approx(5.1e3).epsilon(0.02));
        CHECK(w < 0.0);  // omega_e below the mode
    }
    SUBCASE("sign convention and resonance") {
        CHECK(omega_eff(1.0, 1.0, 2.0, 3.0) > 0.0);
        CHECK(omega_eff(1.0, 1.0, 3.0, 2.0) < 0.0);
        CHECK_THROWS_AS(omega_eff(1.0, 1.0, 2.0, 2.0), ResonanceError);
    }
}

TEST_CASE("alpha trajectory") {
    const double omega_m = two_pi * 2.6e6;
    const double omega_e = two_pi * 2.5e6;
    const double rabi = two_pi * 0.3e6;

    SUBCASE("starts at zero") {
        CHECK(std::abs(alpha_trajectory(0.0, rabi, omega_e, 0.3, omega_m)) == 0.0);
    }
    SUBCASE("slow bracket closes at beat periods when the fast term is disabled") {
        const double beat = two_pi / std::abs(omega_e - omega_m);
        for (int k : {1, 2, 3}) {
            const cplx a = alpha_trajectory(k * beat, rabi, omega_e, 0.7, omega_m, false);
            CHECK(std::abs(a) < 1e-9 * rabi / std::abs(omega_e - omega_m));
        }
    }
    SUBCASE("near-resonance limit |alpha|/t -> Omega_e/2") {
        const double t = 1e-6;
        const double we = omega_m + two_pi * 1.0;  // 1 Hz detuning
        const cplx a = alpha_trajectory(t, rabi, we, 0.0, omega_m, false);
        CHECK(std::abs(a) / t == doctest::Approx(rabi / 2.0).epsilon(1e-6));
    }
    SUBCASE("exact resonance is redirected") {
        CHECK_THROWS_AS(alpha_trajectory(1e-6, rabi, omega_m, 0.0, omega_m), ResonanceError);
    }
}

TEST_CASE("alpha_for_sequence matches the single-drive closed form") {
    const double omega_m = two_pi * 3.1e6;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double rabi = two_pi * (0.05e6 + 0.4e6 * u(rng));
        const double omega_e = omega_m + two_pi * (0.2e6 + 1.5e6 * u(rng)) * (u(rng) < 0.5 ? -1 : 1);
        const double phi = two_pi * u(rng);
        const double t = 40e-6 * u(rng);
        PulseSequence seq;
        seq.electric.push_back({rabi, omega_e, phi, Envelope{EnvelopeShape::square, 0.0, 50e-6, 0.0}});
        seq.total_duration = 50e-6;
        const cplx a = alpha_for_sequence(t, seq, omega_m);
        const cplx b = alpha_trajectory(t, rabi, omega_e, phi, omega_m);
        CHECK(std::abs(a - b) < 1e-12 * (1.0 + std::abs(b)));
    }
}

TEST_CASE("magnus phase agrees with direct quadrature of Im(alpha_dot alpha*)") {
    const double omega_m = two_pi * 2.6e6;
    for (double f_e_mhz : {2.3, 2.75}) {
        const double omega_e = two_pi * f_e_mhz * 1e6;
        const double rabi = two_pi * 0.2e6;
        const double phi = 0.9;
        const double t_end = 7.3e-6;

        // Simpson quadrature oracle on the closed-form integrand
        const int n = 200001;
        const double h = t_end / (n - 1);
        auto integrand = [&](double t) {
            const cplx I(0.0, 1.0);
            const cplx adot = -I * rabi * std::cos(omega_e * t + phi) *
                              std::exp(I * omega_m * t);
            const cplx a = alpha_trajectory(t, rabi, omega_e, phi, omega_m);
            return (adot * std::conj(a)).imag();
        };
        double acc = integrand(0.0) + integrand(t_end);
        for (int k = 1; k < n - 1; ++k) acc += (k % 2 ? 4.0 : 2.0) * integrand(k * h);
        const double gamma_quad = acc * h / 3.0;

        const double gamma = magnus_phase(t_end, rabi, omega_e, phi, omega_m, 0.0, 1.0);
        CHECK(gamma == doctest::Approx(gamma_quad).epsilon(1e-7));
    }
}

TEST_CASE("resonant slope and linearity") {
    FockSpace space = ca40_space(2);
    CHECK(resonant_slope(0.0, space) == 0.0);
    const double s = resonant_slope(0.614, space);
    CHECK(s == doctest::Approx(3.25e6).epsilon(0.01));
    CHECK(resonant_slope(1.228, space) == doctest::Approx(2.0 * s).epsilon(1e-14));
}

TEST_CASE("effective unitary") {
    SUBCASE("zero duration is the identity") {
        Mat2 u = effective_unitary(0.3, 0.0, two_pi * 5e3, Branch::plus);
        CHECK(std::abs(u[0] - cplx(1.0, 0.0)) < 1e-15);
        CHECK(std::abs(u[1]) < 1e-15);
        CHECK(std::abs(u[2]) < 1e-15);
        CHECK(std::abs(u[3] - cplx(1.0, 0.0)) < 1e-15);
    }
    SUBCASE("pi rotation about x flips the spin with a -i phase") {
        const double w = two_pi * 5e3;
        Mat2 u = effective_unitary(0.0, pi / w, w, Branch::plus);
        // |up> -> -i |down>
        CHECK(std::abs(u[1] - cplx(0.0, -1.0)) < 1e-12);
        CHECK(std::abs(u[3]) < 1e-12);
        CHECK(std::norm(u[1]) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("unitarity") {
        Mat2 u = effective_unitary(1.1, 0.3, 2.0, Branch::minus);
        const cplx det = u[0] * u[3] - u[1] * u[2];
        CHECK(std::abs(std::abs(det) - 1.0) < 1e-12);
        CHECK(std::abs(std::norm(u[0]) + std::norm(u[2]) - 1.0) < 1e-12);
    }
    SUBCASE("two pi/2 pulses give the (1 - cos phi)/2 fringe, matrix-product oracle") {
        const double w = two_pi * 5e3;
        const double t_half = (pi / 2.0) / w;
        for (int k = 0; k < 16; ++k) {
            const double phi = two_pi * k / 16.0;
            const Mat2 u1 = effective_unitary(0.0, t_half, w, Branch::plus);
            const Mat2 u2 = effective_unitary(phi, t_half, w, Branch::plus);
            const Mat2 u = mat2_mul(u2, u1);
            // start |up>: P_up = |<up|U|up>|^2 = |m11|^2
            const double p_up = std::norm(u[3]);
            CHECK(p_up == doctest::Approx((1.0 - std::cos(phi)) / 2.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("branch/phase law: axis angle is -phi_e on branch plus") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, two_pi);
    const double w = two_pi * 4e3;
    for (int k = 0; k < 100; ++k) {
        const double phi = u(rng);
        Mat2 m = effective_unitary(phi, 0.4 / w, w, Branch::plus);
        CHECK(std::abs(wrap(axis_angle_from_unitary(m) - wrap(-phi))) < 1e-9);
        Mat2 mm = effective_unitary(phi, 0.4 / w, w, Branch::minus);
        CHECK(std::abs(wrap(axis_angle_from_unitary(mm) - wrap(phi))) < 1e-9);
        EffectiveRotation rot = effective_rotation(two_pi * 0.5e3, two_pi * 2e6,
                                                   two_pi * 2.6e6, two_pi * 2.5e6, phi,
                                                   Branch::plus);
        CHECK(std::abs(wrap(rot.axis_angle - wrap(-phi))) < 1e-12);
    }
}

TEST_CASE("transformed hamiltonian") {
    FockSpace space = ca40_space(8);
    const double omega_e = two_pi * 2.5e6;

    SUBCASE("reduces to the gradient term when Omega_e = 0") {
        PulseSequence seq;
        seq.electric.push_back({0.0, omega_e, 0.0, Envelope{EnvelopeShape::square, 0.0, 1e-5, 0.0}});
        seq.gradient.push_back({two_pi * 1e3, omega_e, SpinAxis::x, 0.0, 1e-5});
        seq.total_duration = 1e-5;
        for (double t : {0.0, 2.2e-6, 7.9e-6}) {
            SparseOperator hi = transformed_hamiltonian(t, seq, space);
            SparseOperator hb = hamiltonian_at(t, seq, space);
            std::vector<std::vector<cplx>> d(space.dim(), std::vector<cplx>(space.dim(), 0.0));
            for (const auto& e : hi.entries) d[e.row][e.col] += e.value;
            for (const auto& e : hb.entries) d[e.row][e.col] -= e.value;
            for (const auto& row : d)
                for (const auto& v : row) CHECK(std::abs(v) < 1e-9);
        }
    }
    SUBCASE("hermitian at random times") {
        PulseSequence seq;
        seq.electric.push_back(
            {two_pi * 0.4e6, omega_e, 0.8, Envelope{EnvelopeShape::square, 0.0, 1e-5, 0.0}});
        seq.gradient.push_back({two_pi * 1e3, omega_e, SpinAxis::x, 0.0, 1e-5});
        seq.total_duration = 1e-5;
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 1e-5);
        for (int k = 0; k < 50; ++k)
            CHECK(transformed_hamiltonian(u(rng), seq, space).conjugate_symmetric());
    }
    SUBCASE("time average approaches the Eq.-(2) rotation generator") {
        // deep dispersive parameters, delta = +omega_e, phi_e = 0
        const double rabi_e = two_pi * 0.3e6;
        const double rabi_g = two_pi * 0.5e3;
        PulseSequence seq;
        const double total = 400e-6;
        seq.electric.push_back({rabi_e, omega_e, 0.0,
                                Envelope{EnvelopeShape::square, 0.0, total, 0.0}});
        seq.gradient.push_back({rabi_g, omega_e, SpinAxis::x, 0.0, total});
        seq.total_duration = total;
        const double w_eff = omega_eff(rabi_g, rabi_e, space.omega_m, omega_e);

        // average over an integer number of delta periods, sampled finely
        const double period = two_pi / omega_e;
        const int periods = 200;
        const int per = 101;
        std::vector<std::vector<cplx>> avg(space.dim(), std::vector<cplx>(space.dim(), 0.0));
        int count = 0;
        for (int p = 0; p < periods; ++p) {
            for (int j = 0; j < per; ++j) {
                const double t = (p + double(j) / per) * period;
                SparseOperator h = transformed_hamiltonian(t, seq, space);
                for (const auto& e : h.entries) avg[e.row][e.col] += e.value;
                ++count;
            }
        }
        // compare the spin-flip block against (omega_eff/2) sigma_x
        const int N = space.n_max;
        for (int n = 0; n < 3; ++n) {
            const cplx coupling = avg[N + n][n] / double(count);
            CHECK(coupling.real() == doctest::Approx(w_eff / 2.0).epsilon(0.02));
            CHECK(std::abs(coupling.imag()) < 0.02 * std::abs(w_eff));
        }
    }
    SUBCASE("resonant drive rejected") {
        PulseSequence seq;
        seq.electric.push_back({two_pi * 0.1e6, space.omega_m, 0.0,
                                Envelope{EnvelopeShape::square, 0.0, 1e-5, 0.0}});
        seq.total_duration = 1e-5;
        CHECK_THROWS_AS(transformed_hamiltonian(1e-6, seq, space), ResonanceError);
    }
}

TEST_CASE("rabi lineshape") {
    const double w = two_pi * 5e3;
    const double t_pi = pi / w;
    CHECK(rabi_lineshape(w, 0.0, t_pi) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rabi_lineshape(0.0, two_pi * 1e3, t_pi) == 0.0);
    CHECK(rabi_lineshape(0.0, 0.0, t_pi) == 0.0);

    // half width of a resonant pi pulse: bisection oracle
    double lo = 0.0, hi = 2.0 * w;
    for (int it = 0; it < 200; ++it) {
        const double mid = (lo + hi) / 2.0;
        if (rabi_lineshape(w, mid, t_pi) > 0.5) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    CHECK(lo / w == doctest::Approx(0.799).epsilon(2e-3));
}

TEST_CASE("two-mode response") {
    const double w1 = two_pi * 2.6e6, w2 = two_pi * 2.8e6;
    const double c1 = 1e10, c2 = 0.4e10;

    SUBCASE("single mode reduces to omega_eff") {
        ModeResponse r{{{w1, c1}}};
        const double we = two_pi * 2.5e6;
        CHECK(two_mode_response(we, r) ==
              doctest::Approx(omega_eff(1.0, c1, w1, we)).epsilon(1e-14));
    }
    SUBCASE("exactly one zero crossing between the modes") {
        ModeResponse r{{{w1, c1}, {w2, c2}}};
        const double lo = w1 + two_pi * 1e3, hi = w2 - two_pi * 1e3;
        int crossings = 0;
        double prev = two_mode_response(lo, r);
        for (int k = 1; k <= 400; ++k) {
            const double v = two_mode_response(lo + (hi - lo) * k / 400.0, r);
            if ((v > 0) != (prev > 0)) ++crossings;
            prev = v;
        }
        CHECK(crossings == 1);
        CHECK(two_mode_response(lo, r) > 0.0);
        CHECK(two_mode_response(hi, r) < 0.0);
    }
    SUBCASE("far above both modes the response decays as 1/omega_e^2") {
        ModeResponse r{{{w1, c1}, {w2, c2}}};
        const double we = 10.0 * w2;
        const double asym = (c1 * w1 + c2 * w2) / (we * we);
        CHECK(two_mode_response(we, r) == doctest::Approx(asym).epsilon(0.015));
    }
    SUBCASE("validation") {
        ModeResponse bad{{{w2, c1}, {w1, c2}}};
        CHECK_THROWS_AS(two_mode_response(two_pi * 3e6, bad), DomainError);
        ModeResponse r{{{w1, c1}}};
        CHECK_THROWS_AS(two_mode_response(w1, r), ResonanceError);
        CHECK_THROWS_AS(two_mode_response(two_pi * 1e6, ModeResponse{}), DomainError);
    }
}

TEST_CASE("apply_displacement builds coherent states and preserves the norm") {
    const int n_max = 40;
    const cplx alpha(0.7, -0.2);
    SpinMotionState vac = SpinMotionState::fock(n_max, true, 0);
    SpinMotionState disp = apply_displacement(vac, alpha, 0.0);
    CHECK(disp.norm() == doctest::Approx(1.0).epsilon(1e-13));
    SpinMotionState coh = SpinMotionState::coherent(n_max, true, alpha);
    CHECK(std::abs(inner_product(coh, disp)) > 1.0 - 1e-10);

    SpinMotionState phased = apply_displacement(vac, alpha, 0.5);
    CHECK(std::abs(inner_product(disp, phased) - std::polar(1.0, 0.5)) < 1e-12);
}
