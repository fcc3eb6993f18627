#pragma once

#include "wmest/model.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace wmest {

/// Plug-in pieces of the sandwich covariance V^-1 (B + C) V^-1 evaluated at a point.
struct CovarianceReport {
    Matrix B_hat;      ///< estimates c_w B_theta
    Matrix C_hat;      ///< estimates C_theta^w (symmetrized)
    Matrix V_hat;
    Matrix Sigma_hat;
    Point eval_point;
    double condition_V = 0.0;
    /// Observations whose psi-jacobian sat on a nonsmooth locus at eval_point.
    std::size_t nonsmooth_count = 0;
    std::string family;
};

/// Finite-n versions of the weight conditions behind consistency and asymptotic normality.
struct AssumptionDiagnostics {
    double weight_mean = 0.0;         ///< (1/N_n) sum_ij w_ij
    double c_w_finite = 0.0;          ///< (1/N_n) sum_ij w_ij^2
    double kolmogorov_partial = 0.0;  ///< sum_i w_i.^2 / i^2
    double lindeberg_sum = 0.0;       ///< (1/N_n) sum_i w_i.^(2 + eta)
};

inline constexpr double kMaxConditionV = 1e12;

/// (1/N_n) sum_i w_i^2 sum_j psi psi^T. Requires per-cluster weights.
Matrix b_hat(const ClusteredSample& sample, const WeightScheme& w, const EstimatorFamily& fam,
             const Eigen::Ref<const Point>& a);

/// (1/N_n) sum_i w_i^2 sum_j sum_{j' != j} psi(X_ij') psi(X_ij)^T, symmetrized.
Matrix c_hat(const ClusteredSample& sample, const WeightScheme& w, const EstimatorFamily& fam,
             const Eigen::Ref<const Point>& a);

/// (1/N_n) sum_i w_i sum_j d psi / d a.
Matrix v_hat(const ClusteredSample& sample, const WeightScheme& w, const EstimatorFamily& fam,
             const Eigen::Ref<const Point>& a);

/// Full sandwich. Throws NumericalError when V_hat is singular (condition >= kMaxConditionV).
CovarianceReport sigma_hat(const ClusteredSample& sample, const WeightScheme& w, const EstimatorFamily& fam,
                           const Eigen::Ref<const Point>& a);

/// Builds Sigma = V^-1 (B + C) V^-1 from already-computed pieces.
CovarianceReport assemble_sandwich(Matrix B, Matrix C, Matrix V, Point eval_point, std::string family);

/// [det(Sigma_unweighted) / det(Sigma_weighted)]^(1/d); > 1 favours the weighted estimator.
double relative_efficiency(const CovarianceReport& unweighted, const CovarianceReport& weighted);
double relative_efficiency(const Matrix& sigma_unweighted, const Matrix& sigma_weighted);

AssumptionDiagnostics assumption_diagnostics(const WeightScheme& w, const ClusteredSample& sample, double eta = 1.0);

/// Unweighted per-cluster score moments at a fixed point. Any per-cluster
/// weight vector turns them into B_hat, C_hat and V_hat without revisiting
/// the data, and moments from independent replications can be averaged.
class ClusterMoments {
public:
    ClusterMoments() = default;
    ClusterMoments(std::vector<std::size_t> sizes, Eigen::Index dim);

    static ClusterMoments compute(const ClusteredSample& sample, const EstimatorFamily& fam,
                                  const Eigen::Ref<const Point>& a);

    std::size_t cluster_count() const noexcept { return sizes_.size(); }
    const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
    std::size_t total() const noexcept { return total_; }
    Eigen::Index dim() const noexcept { return dim_; }

    /// sum_j psi psi^T for cluster i.
    Matrix& outer(std::size_t i) { return outer_.at(i); }
    const Matrix& outer(std::size_t i) const { return outer_.at(i); }
    /// sum_j sum_{j' != j} psi(X_ij') psi(X_ij)^T for cluster i (symmetrized).
    Matrix& cross(std::size_t i) { return cross_.at(i); }
    const Matrix& cross(std::size_t i) const { return cross_.at(i); }
    /// sum_j psi-jacobian for cluster i.
    Matrix& jacobian(std::size_t i) { return jacobian_.at(i); }
    const Matrix& jacobian(std::size_t i) const { return jacobian_.at(i); }

    ClusterMoments& operator+=(const ClusterMoments& other);
    ClusterMoments& operator*=(double factor);

    Matrix b(std::span<const double> weights) const;
    Matrix c(std::span<const double> weights) const;
    Matrix v(std::span<const double> weights) const;

    CovarianceReport sandwich(std::span<const double> weights, const Point& eval_point,
                              const std::string& family) const;
    /// det of the sandwich for the given weights; +inf when V is singular.
    double sandwich_det(std::span<const double> weights) const;

private:
    std::vector<std::size_t> sizes_;
    std::size_t total_ = 0;
    Eigen::Index dim_ = 0;
    std::vector<Matrix> outer_;
    std::vector<Matrix> cross_;
    std::vector<Matrix> jacobian_;
};

}  // namespace wmest
