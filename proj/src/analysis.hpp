#pragma once

// Deterministic curve fitting: Nelder-Mead simplex minimizer with fixed
// initialization rules, decaying sinusoids, Rabi lineshapes, blue-sideband
// coherent-state flops and (weighted) linear least squares.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "errors.hpp"

namespace fms {

struct DataPoint {
    double x = 0.0;
    double y = 0.0;
    double sigma = 0.0;  // <= 0 means absent (unweighted)
};

struct DataSeries {
    std::vector<DataPoint> points;  // x strictly increasing

    void validate(size_t min_points = 4) const;
    double x_span() const;
};

struct FitResult {
    std::map<std::string, double> params;
    double residual_norm = 0.0;
    bool converged = false;
    int iterations = 0;
};

using Objective = std::function<double(const std::vector<double>&)>;

// Nelder-Mead with deterministic initial simplex (5% per-coordinate
// displacement, 2.5e-4 for zero coordinates) and standard coefficients.
// Convergence: simplex diameter and objective spread both below tol.
// Exceeding max_iter returns converged = false, not an exception.
FitResult minimize(const Objective& objective, const std::vector<double>& x0, double tol,
                   int max_iter);

// y = offset + amplitude e^{-t/decay_time} cos(2 pi frequency t + phase).
// Frequency initialized from the discrete spectral peak; refuses (DomainError)
// when the series spans < 1.5 estimated periods.
FitResult fit_decaying_sinusoid(const DataSeries& series);

// Transfer-probability lineshape with Delta = x - center_frequency, in the
// same (angular) units as the series x axis.
FitResult fit_rabi_lineshape(const DataSeries& series, double duration);

// P_up(t) = sum_n p_n(|alpha|) sin^2(Omega_0 sqrt(n+1) t / 2), Poissonian p_n
// truncated at tail < 1e-8.
FitResult fit_bsb_coherent(const DataSeries& series, double omega_0_rabi);

// Closed-form (weighted) least squares.
FitResult fit_linear(const DataSeries& series, bool through_origin);

}  // namespace fms
