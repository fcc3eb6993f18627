#pragma once

#include "wmest/model.hpp"

#include <cstddef>
#include <optional>

namespace wmest {

struct SolveOptions {
    double gradient_tolerance = 1e-10;
    double step_tolerance = 1e-12;
    std::size_t max_iterations = 500;
    /// Newton steps fall back to gradient descent above this Jacobian condition number.
    double max_condition = 1e12;
    /// Start from this point instead of the family's default initializer.
    std::optional<Point> initial;
};

struct SolveResult {
    Point theta_hat;
    std::size_t iterations = 0;
    bool converged = false;
    /// Norm of (1/N_n) sum w_ij psi(X_ij, theta_hat); for the spatial median at
    /// a data point, the norm of the minimum-norm subgradient.
    double final_gradient_norm = 0.0;
    double objective_value = 0.0;
};

/// theta_hat minimizing M_n^w, i.e. the zero of the weighted estimating equation.
/// Non-convergence is reported through SolveResult::converged, never thrown.
SolveResult solve(const ClusteredSample& sample, const WeightScheme& w, const EstimatorFamily& fam,
                  const SolveOptions& opts = {});

/// Coordinatewise weighted median (lower median on ties).
Point coordinatewise_weighted_median(const ClusteredSample& sample, const WeightScheme& w);
Point weighted_mean(const ClusteredSample& sample, const WeightScheme& w);

}  // namespace wmest
