#include "analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include "constants.hpp"
#include "effective.hpp"

namespace fms {

namespace {

double protected_eval(const Objective& f, const std::vector<double>& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
}

// weighted sum of squared residuals
double sse(const DataSeries& s, const std::function<double(double)>& model) {
    double acc = 0.0;
    for (const auto& p : s.points) {
        const double r = p.y - model(p.x);
        const double w = p.sigma > 0.0 ? 1.0 / (p.sigma * p.sigma) : 1.0;
        acc += w * r * r;
    }
    return acc;
}

double wrap_angle(double a) {
    a = std::fmod(a, constants::two_pi);
    if (a > constants::pi) a -= constants::two_pi;
    if (a <= -constants::pi) a += constants::two_pi;
    return a;
}

FitResult refine(const Objective& obj, std::vector<double> x, double tol, int max_iter) {
    FitResult r = minimize(obj, x, tol, max_iter);
    std::vector<double> best(r.params.size());
    for (size_t i = 0; i < best.size(); ++i) best[i] = r.params.at("x" + std::to_string(i));
    FitResult r2 = minimize(obj, best, tol, max_iter);
    r2.iterations += r.iterations;
    return r2;
}

double param(const FitResult& r, int i) { return r.params.at("x" + std::to_string(i)); }

}  // namespace

void DataSeries::validate(size_t min_points) const {
    if (points.size() < min_points)
        throw DomainError("DataSeries: at least " + std::to_string(min_points) +
                          " points required for this fit");
    for (size_t i = 0; i < points.size(); ++i) {
        if (i > 0 && !(points[i].x > points[i - 1].x))
            throw DomainError("DataSeries: x must be strictly increasing");
        if (points[i].sigma < 0.0) throw DomainError("DataSeries: sigma must be positive or absent");
    }
}

double DataSeries::x_span() const { return points.back().x - points.front().x; }

FitResult minimize(const Objective& objective, const std::vector<double>& x0, double tol,
                   int max_iter) {
    const size_t n = x0.size();
    if (n == 0) throw UsageError("minimize: empty parameter vector");
    if (!std::isfinite(objective(x0)))
        throw DomainError("minimize: objective not finite at x0");

    std::vector<std::vector<double>> v(n + 1, x0);
    for (size_t i = 0; i < n; ++i)
        v[i + 1][i] += (x0[i] != 0.0) ? 0.05 * x0[i] : 2.5e-4;
    std::vector<double> f(n + 1);
    for (size_t i = 0; i <= n; ++i) f[i] = protected_eval(objective, v[i]);

    std::vector<size_t> idx(n + 1);
    std::iota(idx.begin(), idx.end(), 0);

    bool converged = false;
    int it = 0;
    for (; it < max_iter; ++it) {
        std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return f[a] < f[b]; });
        const size_t best = idx[0], second = idx[n - 1], worst = idx[n];

        double diam = 0.0;
        for (size_t i = 0; i <= n; ++i)
            for (size_t j = 0; j < n; ++j)
                diam = std::max(diam, std::abs(v[i][j] - v[best][j]));
        if (diam < tol && f[worst] - f[best] < tol) {
            converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (size_t j = 0; j < n; ++j) centroid[j] += v[i][j];
        }
        for (auto& c : centroid) c /= double(n);

        auto blend = [&](double w) {
            std::vector<double> p(n);
            for (size_t j = 0; j < n; ++j) p[j] = centroid[j] + w * (centroid[j] - v[worst][j]);
            return p;
        };

        const auto xr = blend(1.0);
        const double fr = protected_eval(objective, xr);
        if (fr < f[best]) {
            const auto xe = blend(2.0);
            const double fe = protected_eval(objective, xe);
            if (fe < fr) {
                v[worst] = xe;
                f[worst] = fe;
            } else {
                v[worst] = xr;
                f[worst] = fr;
            }
            continue;
        }
        if (fr < f[second]) {
            v[worst] = xr;
            f[worst] = fr;
            continue;
        }
        const bool outside = fr < f[worst];
        const auto xc = blend(outside ? 0.5 : -0.5);
        const double fc = protected_eval(objective, xc);
        if ((outside && fc <= fr) || (!outside && fc < f[worst])) {
            v[worst] = xc;
            f[worst] = fc;
            continue;
        }
        for (size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (size_t j = 0; j < n; ++j) v[i][j] = v[best][j] + 0.5 * (v[i][j] - v[best][j]);
            f[i] = protected_eval(objective, v[i]);
        }
    }

    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return f[a] < f[b]; });
    FitResult res;
    res.converged = converged;
    res.iterations = it;
    res.residual_norm = f[idx[0]];
    for (size_t j = 0; j < n; ++j) res.params["x" + std::to_string(j)] = v[idx[0]][j];
    return res;
}

FitResult fit_decaying_sinusoid(const DataSeries& series) {
    series.validate(8);
    const size_t n = series.points.size();
    const double t0 = series.points.front().x;
    const double span = series.x_span();
    if (span <= 0.0) throw DomainError("fit_decaying_sinusoid: zero time span");

    double mean = 0.0, ymin = series.points[0].y, ymax = series.points[0].y;
    for (const auto& p : series.points) {
        mean += p.y;
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    mean /= double(n);

    // discrete spectral peak on scaled time (f' counts periods per span)
    const std::complex<double> I(0.0, 1.0);
    double best_power = -1.0, f_peak = 0.0;
    std::complex<double> peak_sum = 0.0;
    const double f_max = double(n) / 2.0;
    for (double fp = 0.5; fp <= f_max; fp += 0.125) {
        std::complex<double> s = 0.0;
        for (const auto& p : series.points) {
            const double tp = (p.x - t0) / span;
            s += (p.y - mean) * std::exp(-I * (constants::two_pi * fp * tp));
        }
        if (std::norm(s) > best_power) {
            best_power = std::norm(s);
            f_peak = fp;
            peak_sum = s;
        }
    }
    if (f_peak < 1.5)
        throw DomainError("fit_decaying_sinusoid: series spans fewer than 1.5 oscillation "
                          "periods of the spectral peak");

    // scaled parameters: offset, amplitude, periods-per-span, phase, log decay rate
    const std::vector<double> p0{mean, (ymax - ymin) / 2.0, f_peak, std::arg(peak_sum),
                                 std::log(0.5)};
    auto model_at = [&](const std::vector<double>& p, double x) {
        const double tp = (x - t0) / span;
        return p[0] + p[1] * std::exp(-std::exp(p[4]) * tp) *
                          std::cos(constants::two_pi * p[2] * tp + p[3]);
    };
    Objective obj = [&](const std::vector<double>& p) {
        return sse(series, [&](double x) { return model_at(p, x); });
    };

    FitResult nm = refine(obj, p0, 1e-14, 4000);
    double amp = param(nm, 1), phase = param(nm, 3);
    if (amp < 0.0) {
        amp = -amp;
        phase += constants::pi;
    }
    FitResult out;
    out.converged = nm.converged;
    out.iterations = nm.iterations;
    out.residual_norm = std::sqrt(nm.residual_norm);
    out.params["offset"] = param(nm, 0);
    out.params["amplitude"] = amp;
    out.params["frequency"] = std::abs(param(nm, 2)) / span;
    out.params["phase"] = wrap_angle(phase);
    out.params["decay_time"] = span / std::exp(param(nm, 4));
    return out;
}

FitResult fit_rabi_lineshape(const DataSeries& series, double duration) {
    series.validate(4);
    if (duration <= 0.0) throw DomainError("fit_rabi_lineshape: duration must be > 0");
    const size_t n = series.points.size();

    size_t imax = 0;
    double ymin = series.points[0].y, ymax = series.points[0].y;
    for (size_t i = 0; i < n; ++i) {
        if (series.points[i].y > ymax) {
            ymax = series.points[i].y;
            imax = i;
        }
        ymin = std::min(ymin, series.points[i].y);
    }
    if (imax == 0 || imax == n - 1 || ymax - ymin < 0.1)
        throw DomainError("fit_rabi_lineshape: no central peak detectable inside the scan");

    const double omega_scale = constants::pi / duration;
    const double span = series.x_span();
    const double mid = series.points[imax].x;

    auto model_at = [&](const std::vector<double>& p, double x) {
        return rabi_lineshape(p[0] * omega_scale, x - (mid + p[1] * span), duration);
    };
    Objective obj = [&](const std::vector<double>& p) {
        return sse(series, [&](double x) { return model_at(p, x); });
    };
    FitResult nm = refine(obj, {1.0, 0.0}, 1e-13, 3000);

    FitResult out;
    out.converged = nm.converged;
    out.iterations = nm.iterations;
    out.residual_norm = std::sqrt(nm.residual_norm);
    out.params["omega_eff"] = std::abs(param(nm, 0)) * omega_scale;
    out.params["center_frequency"] = mid + param(nm, 1) * span;
    return out;
}

namespace {

double bsb_model(double alpha_mag, double omega0, double t) {
    const double lambda = alpha_mag * alpha_mag;
    double p = std::exp(-lambda);
    double cum = 0.0, value = 0.0;
    for (int n = 0; n < 512; ++n) {
        const double s = std::sin(omega0 * std::sqrt(double(n + 1)) * t / 2.0);
        value += p * s * s;
        cum += p;
        if (1.0 - cum < 1e-8) break;
        p *= lambda / double(n + 1);
    }
    return value;
}

}  // namespace

FitResult fit_bsb_coherent(const DataSeries& series, double omega_0_rabi) {
    series.validate(4);
    if (omega_0_rabi <= 0.0) throw DomainError("fit_bsb_coherent: omega_0_rabi must be > 0");

    Objective obj = [&](const std::vector<double>& p) {
        return sse(series, [&](double t) { return bsb_model(std::abs(p[0]), omega_0_rabi, t); });
    };

    double best_a = 0.0, best_v = std::numeric_limits<double>::max();
    for (double a = 0.0; a <= 8.0; a += 0.25) {
        const double v = obj({a});
        if (v < best_v) {
            best_v = v;
            best_a = a;
        }
    }
    FitResult nm = refine(obj, {best_a}, 1e-14, 2000);

    FitResult out;
    out.converged = nm.converged;
    out.iterations = nm.iterations;
    out.residual_norm = std::sqrt(nm.residual_norm);
    out.params["alpha_mag"] = std::abs(param(nm, 0));
    return out;
}

FitResult fit_linear(const DataSeries& series, bool through_origin) {
    series.validate(2);
    double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& p : series.points) {
        const double w = p.sigma > 0.0 ? 1.0 / (p.sigma * p.sigma) : 1.0;
        sw += w;
        sx += w * p.x;
        sy += w * p.y;
        sxx += w * p.x * p.x;
        sxy += w * p.x * p.y;
    }

    FitResult out;
    out.converged = true;
    out.iterations = 0;
    double slope, intercept = 0.0;
    if (through_origin) {
        if (sxx == 0.0) throw DomainError("fit_linear: degenerate x values");
        slope = sxy / sxx;
    } else {
        const double det = sw * sxx - sx * sx;
        if (det <= 0.0 || det < 1e-14 * sw * sxx)
            throw DomainError("fit_linear: degenerate x values");
        slope = (sw * sxy - sx * sy) / det;
        intercept = (sxx * sy - sx * sxy) / det;
        out.params["intercept"] = intercept;
    }
    out.params["slope"] = slope;
    double acc = 0.0;
    for (const auto& p : series.points) {
        const double w = p.sigma > 0.0 ? 1.0 / (p.sigma * p.sigma) : 1.0;
        const double r = p.y - (slope * p.x + intercept);
        acc += w * r * r;
    }
    out.residual_norm = std::sqrt(acc);
    return out;
}

}  // namespace fms
