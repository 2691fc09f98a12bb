#include "effective.hpp"

#include <algorithm>
#include <cmath>

#include "constants.hpp"

namespace fms {

namespace {

const cplx I(0.0, 1.0);

// (e^z - 1)/z, stable for small |z|.
cplx phi1(cplx z) {
    if (std::abs(z) < 1e-4) {
        return 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
    }
    return (std::exp(z) - 1.0) / z;
}

// integral of e^{i nu s} ds over [ta, tb]
cplx osc_integral(double nu, double ta, double tb) {
    const double dt = tb - ta;
    return std::exp(I * nu * ta) * dt * phi1(I * nu * dt);
}

// integral of e^{i nu s} (s - ta) ds over [ta, tb]
cplx osc_ramp_integral(double nu, double ta, double tb) {
    const double T = tb - ta;
    const cplx z = I * nu * T;
    if (std::abs(z) < 1e-4) {
        return std::exp(I * nu * ta) * T * T *
               (0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0);
    }
    const cplx e = std::exp(z);
    return std::exp(I * nu * ta) * (T * e / (I * nu) + (e - 1.0) / (nu * nu));
}

struct EnvelopeTone {
    cplx amp;
    double freq;
};

struct EnvelopePiece {
    double a, b;
    int n_tones;
    std::array<EnvelopeTone, 3> tones;
};

// The envelope as piecewise sums of complex exponentials: a sin^2 edge is
// 1/2 -/+ (1/4) e^{+-i pi (t - t0)/tau}, a plateau is the single tone 1.
std::vector<EnvelopePiece> envelope_pieces(const Envelope& env) {
    std::vector<EnvelopePiece> pieces;
    if (env.shape == EnvelopeShape::square) {
        pieces.push_back({env.start_time, env.end_time(), 1, {EnvelopeTone{1.0, 0.0}}});
        return pieces;
    }
    const double tau = env.ramp_duration;
    const double w = constants::pi / tau;
    const double s = env.start_time;
    const double p0 = s + tau;                   // plateau start
    const double f0 = p0 + env.plateau_duration; // falling edge start
    pieces.push_back({s, p0, 3,
                      {EnvelopeTone{0.5, 0.0},
                       EnvelopeTone{-0.25 * std::exp(-I * w * s), w},
                       EnvelopeTone{-0.25 * std::exp(I * w * s), -w}}});
    if (env.plateau_duration > 0.0)
        pieces.push_back({p0, f0, 1, {EnvelopeTone{1.0, 0.0}}});
    pieces.push_back({f0, f0 + tau, 3,
                      {EnvelopeTone{0.5, 0.0},
                       EnvelopeTone{0.25 * std::exp(-I * w * f0), w},
                       EnvelopeTone{0.25 * std::exp(I * w * f0), -w}}});
    return pieces;
}

cplx alpha_one_drive(double t, double omega_e_rabi, double omega_e, double phi_e,
                     double omega_m, const Envelope& env, bool include_fast_term) {
    // alpha' = -i (Omega_e/2) env(s) [e^{i((w_m+w_e)s + phi)} + e^{i((w_m-w_e)s - phi)}]
    cplx acc = 0.0;
    for (const EnvelopePiece& piece : envelope_pieces(env)) {
        const double tb = std::min(t, piece.b);
        if (tb <= piece.a) break;
        for (int k = 0; k < piece.n_tones; ++k) {
            const EnvelopeTone& tone = piece.tones[k];
            acc += tone.amp * std::exp(-I * phi_e) *
                   osc_integral(omega_m - omega_e + tone.freq, piece.a, tb);
            if (include_fast_term)
                acc += tone.amp * std::exp(I * phi_e) *
                       osc_integral(omega_m + omega_e + tone.freq, piece.a, tb);
        }
    }
    return -I * (omega_e_rabi / 2.0) * acc;
}

double wrap_angle(double a) {
    a = std::fmod(a, constants::two_pi);
    if (a > constants::pi) a -= constants::two_pi;
    if (a <= -constants::pi) a += constants::two_pi;
    return a;
}

}  // namespace

double omega_eff(double omega_g_rabi, double omega_e_rabi, double omega_m, double omega_e) {
    const double denom = omega_e * omega_e - omega_m * omega_m;
    if (denom == 0.0)
        throw ResonanceError("omega_eff: electric drive resonant with the motional mode");
    return omega_g_rabi * omega_e_rabi * omega_m / denom;
}

EffectiveRotation effective_rotation(double omega_g_rabi, double omega_e_rabi, double omega_m,
                                     double omega_e, double phi_e, Branch branch) {
    EffectiveRotation r;
    r.omega_eff = omega_eff(omega_g_rabi, omega_e_rabi, omega_m, omega_e);
    r.branch = branch;
    r.axis_angle = wrap_angle(branch == Branch::plus ? -phi_e : phi_e);
    return r;
}

cplx alpha_trajectory(double t, double omega_e_rabi, double omega_e, double phi_e,
                      double omega_m, bool include_fast_term) {
    if (t < 0.0) throw DomainError("alpha_trajectory: t must be >= 0");
    if (omega_e == omega_m)
        throw ResonanceError("alpha_trajectory: exact resonance; use resonant_slope");
    const Envelope env{EnvelopeShape::square, 0.0, std::max(t, 1e-30), 0.0};
    return alpha_one_drive(t, omega_e_rabi, omega_e, phi_e, omega_m, env, include_fast_term);
}

cplx alpha_for_sequence(double t, const PulseSequence& seq, double omega_m) {
    cplx a = 0.0;
    for (const auto& e : seq.electric) {
        a += alpha_one_drive(t, e.omega_e_rabi, e.omega_e, e.phi_e, omega_m, e.envelope, true);
    }
    return a;
}

double magnus_phase(double t, double omega_e_rabi, double omega_e, double phi_e,
                    double omega_m, double window_start, double window_end) {
    const double tb = std::min(t, window_end);
    if (tb <= window_start) return 0.0;
    const double T = tb - window_start;

    // alpha_dot(s) = sum_j d_j e^{i f_j s}
    struct Osc {
        cplx d;
        double f;
    };
    const std::array<Osc, 2> dot{
        Osc{-I * (omega_e_rabi / 2.0) * std::exp(I * phi_e), omega_m + omega_e},
        Osc{-I * (omega_e_rabi / 2.0) * std::exp(-I * phi_e), omega_m - omega_e}};

    // gamma(t) = Im integral alpha_dot(s) alpha*(s) ds with
    // alpha_k(s) = d_k integral_{t0}^{s} e^{i f_k u} du
    cplx total = 0.0;
    for (const auto& dj : dot) {
        for (const auto& dk : dot) {
            if (std::abs(dk.f) * T < 1e-6) {
                // resonant component: alpha_k(s) ~ d_k (s - t0)
                total += dj.d * std::conj(dk.d) * osc_ramp_integral(dj.f, window_start, tb);
            } else {
                // conj(alpha_k(s)) = conj(d_k) (i/f_k)(e^{-i f_k s} - e^{-i f_k t0})
                const cplx bracket =
                    osc_integral(dj.f - dk.f, window_start, tb) -
                    std::exp(-I * dk.f * window_start) * osc_integral(dj.f, window_start, tb);
                total += dj.d * std::conj(dk.d) * (I / dk.f) * bracket;
            }
        }
    }
    return total.imag();
}

double resonant_slope(double e_field, const FockSpace& space) {
    if (e_field < 0.0) throw DomainError("resonant_slope: E must be >= 0");
    return space.charge * e_field * space.r0() / (2.0 * constants::hbar);
}

Mat2 mat2_mul(const Mat2& a, const Mat2& b) {
    return Mat2{a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
                a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

Mat2 effective_unitary(double phi_e, double duration, double omega_eff_val, Branch branch) {
    const double theta = omega_eff_val * duration;
    const double c = std::cos(theta / 2.0);
    const double s = std::sin(theta / 2.0);
    const double nx = std::cos(phi_e);
    const double ny = (branch == Branch::plus ? -1.0 : 1.0) * std::sin(phi_e);
    // basis (|down>, |up>): sigma_x = [[0,1],[1,0]], sigma_y = [[0,i],[-i,0]]
    // n.sigma = [[0, nx + i ny], [nx - i ny, 0]] for equatorial axes
    return Mat2{cplx(c, 0.0), -I * s * cplx(nx, ny), -I * s * cplx(nx, -ny), cplx(c, 0.0)};
}

double axis_angle_from_unitary(const Mat2& u) {
    // strip the global phase via the determinant, then read the equatorial
    // axis off the (0,1) element of the SU(2) representative:
    // v01 = s*ny - i s*nx with s = sin(theta/2) taken >= 0
    const cplx det = u[0] * u[3] - u[1] * u[2];
    const cplx root = std::sqrt(det);
    const cplx v01 = u[1] / root;
    const double snx = -v01.imag();
    const double sny = v01.real();
    return std::atan2(sny, snx);
}

SparseOperator transformed_hamiltonian(double t, const PulseSequence& seq,
                                       const FockSpace& space) {
    for (const auto& e : seq.electric) {
        if (e.omega_e == space.omega_m)
            throw ResonanceError("transformed_hamiltonian: drive resonant with the mode");
    }
    if (t < 0.0 || t > seq.total_duration)
        throw DomainError("transformed_hamiltonian: t outside the sequence");

    const int N = space.n_max;
    SparseOperator h;
    h.dimension = 2 * N;
    h.hermitian_flag = true;

    const cplx alpha = alpha_for_sequence(t, seq, space.omega_m);
    const double s_shift = 2.0 * std::real(alpha * std::exp(-I * space.omega_m * t));

    for (const auto& g : seq.gradient) {
        if (t < g.t_on || t >= g.t_off) continue;
        if (g.spin_axis == SpinAxis::z) {
            // sigma_z needs no spin rotating frame; delta holds the drive frequency
            const double cg = g.omega_g_rabi * std::cos(g.delta * t);
            for (int s = 0; s < 2; ++s) {
                const double sgn = (s == 0 ? -1.0 : 1.0);
                const int off = s * N;
                for (int n = 1; n < N; ++n) {
                    const cplx v = sgn * cg * std::sqrt(double(n)) *
                                   std::exp(-I * space.omega_m * t);
                    h.add(off + n - 1, off + n, v);
                    h.add(off + n, off + n - 1, std::conj(v));
                }
                for (int n = 0; n < N; ++n) h.add(off + n, off + n, sgn * cg * s_shift);
            }
            continue;
        }
        const cplx axis_factor = (g.spin_axis == SpinAxis::x) ? cplx(1.0, 0.0) : -I;
        const cplx cplus = (g.omega_g_rabi / 2.0) * axis_factor * std::exp(-I * g.delta * t);
        for (int n = 1; n < N; ++n) {
            const cplx v = cplus * std::sqrt(double(n)) * std::exp(-I * space.omega_m * t);
            h.add(N + n - 1, n, v);
            h.add(n, N + n - 1, std::conj(v));
        }
        for (int n = 0; n + 1 < N; ++n) {
            const cplx v = cplus * std::sqrt(double(n + 1)) * std::exp(I * space.omega_m * t);
            h.add(N + n + 1, n, v);
            h.add(n, N + n + 1, std::conj(v));
        }
        for (int n = 0; n < N; ++n) {
            const cplx v = cplus * s_shift;
            h.add(N + n, n, v);
            h.add(n, N + n, std::conj(v));
        }
    }
    return h;
}

double rabi_lineshape(double omega_eff_val, double detuning, double duration) {
    const double w2 = omega_eff_val * omega_eff_val;
    const double g2 = w2 + detuning * detuning;
    if (g2 == 0.0) return 0.0;
    const double s = std::sin(std::sqrt(g2) * duration / 2.0);
    return w2 / g2 * s * s;
}

void ModeResponse::validate() const {
    if (modes.empty()) throw DomainError("ModeResponse: mode list must be non-empty");
    for (size_t k = 1; k < modes.size(); ++k) {
        if (!(modes[k].omega_m > modes[k - 1].omega_m))
            throw DomainError("ModeResponse: mode frequencies must be strictly increasing");
    }
}

double two_mode_response(double omega_e, const ModeResponse& response) {
    response.validate();
    double sum = 0.0;
    for (const auto& m : response.modes) {
        const double denom = omega_e * omega_e - m.omega_m * m.omega_m;
        if (denom == 0.0)
            throw ResonanceError("two_mode_response: drive resonant with a mode");
        sum += m.coupling_product * m.omega_m / denom;
    }
    return sum;
}

SpinMotionState apply_displacement(const SpinMotionState& state, cplx alpha, double phase) {
    const int N = state.n_max;
    // generator G = alpha a^dag - alpha* a per spin block; exactly
    // anti-hermitian on the truncated space, so exp(G) is exactly unitary
    auto apply_g = [&](const std::vector<cplx>& x, std::vector<cplx>& y) {
        y.assign(x.size(), cplx(0.0));
        for (int s = 0; s < 2; ++s) {
            const int off = s * N;
            for (int n = 0; n + 1 < N; ++n) {
                const double r = std::sqrt(double(n + 1));
                y[off + n + 1] += alpha * r * x[off + n];
                y[off + n] -= std::conj(alpha) * r * x[off + n + 1];
            }
        }
    };

    const double bound = 2.0 * std::abs(alpha) * std::sqrt(double(N));
    const int substeps = std::max(1, int(std::ceil(bound / 0.5)));

    SpinMotionState out = state;
    std::vector<cplx> v, w;
    for (int step = 0; step < substeps; ++step) {
        std::vector<cplx> acc = out.amp;
        v = out.amp;
        for (int k = 1; k <= 80; ++k) {
            apply_g(v, w);
            const double inv = 1.0 / (double(k) * substeps);
            for (auto& z : w) z *= inv;
            v.swap(w);
            double vn = 0.0, an = 0.0;
            for (size_t i = 0; i < v.size(); ++i) {
                acc[i] += v[i];
                vn += std::norm(v[i]);
                an += std::norm(acc[i]);
            }
            if (vn <= 1e-32 * an) break;
        }
        out.amp.swap(acc);
    }
    if (phase != 0.0) {
        const cplx ph = std::exp(I * phase);
        for (auto& z : out.amp) z *= ph;
    }
    return out;
}

}  // namespace fms
