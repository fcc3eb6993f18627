#pragma once

#include "wmest/asymptotics.hpp"
#include "wmest/model.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace wmest {

struct WeightOptimizationOptions {
    /// Lower bound on every normalized weight.
    double floor = 1e-6;
    /// Stop once a full coordinate sweep improves log det(Sigma) by less than this.
    double tolerance = 1e-12;
    std::size_t max_sweeps = 500;
    /// Cross-check the coordinate-descent optimum with restarted Nelder-Mead.
    bool nelder_mead_check = true;
    std::size_t nelder_mead_restarts = 3;
    /// Average the weights of clusters that share a size.
    bool symmetrize_groups = true;
};

struct WeightOptimizationResult {
    /// Per-cluster weights with (1/N_n) sum_i m_i w_i = 1.
    std::vector<double> weights;
    /// det(Sigma_hat^w) at the returned weights.
    double objective = 0.0;
    /// det(Sigma_hat) with w = 1.
    double unweighted_objective = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// det(Sigma_hat^w) after each coordinate sweep.
    std::vector<double> trace;
};

/// Minimizes det(V^-1 (B + C) V^-1) over per-cluster weights for precomputed moments.
WeightOptimizationResult optimize_weights(const ClusterMoments& moments, const WeightOptimizationOptions& opts = {});

/// Same objective built from one sample evaluated at a.
WeightOptimizationResult optimize_weights(const ClusteredSample& sample, const EstimatorFamily& fam,
                                          const Eigen::Ref<const Point>& a,
                                          const WeightOptimizationOptions& opts = {});

/// Optimal weights when every cluster has C_i = tau * B (equicorrelated
/// scores): w_i proportional to 1 / (1 + (m_i - 1) tau), normalized so that
/// sum_i m_i w_i = N_n.
std::vector<double> closed_form_weights(std::span<const std::size_t> sizes, double tau);

/// Population moments of the mean under equicorrelation tau with identity
/// component covariance: B_i = m_i I, C_i = m_i (m_i - 1) tau I, V_i = m_i I.
ClusterMoments equicorrelated_moments(std::span<const std::size_t> sizes, double tau, Eigen::Index dim = 2);

/// Rescales so that (1/N_n) sum_i m_i w_i = 1.
std::vector<double> normalize_cluster_weights(std::span<const std::size_t> sizes, std::span<const double> weights);

/// Mean weight per distinct cluster size, in increasing size order.
std::vector<std::pair<std::size_t, double>> group_mean_weights(std::span<const std::size_t> sizes,
                                                               std::span<const double> weights);

}  // namespace wmest
