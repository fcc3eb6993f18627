#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wmest {

using Point = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Distance below which an observation is treated as coinciding with the
/// evaluation point (spatial-median score set to zero there).
inline constexpr double kTieTolerance = 1e-12;

/// n independent clusters of m_i points in R^d. Cluster i is stored as a
/// d x m_i matrix whose columns are the observations.
class ClusteredSample {
public:
    explicit ClusteredSample(std::vector<Matrix> clusters);

    static ClusteredSample from_points(const std::vector<std::vector<Point>>& clusters);

    std::size_t cluster_count() const noexcept { return clusters_.size(); }
    std::size_t cluster_size(std::size_t i) const { return static_cast<std::size_t>(clusters_.at(i).cols()); }
    std::vector<std::size_t> sizes() const;
    std::size_t total() const noexcept { return total_; }
    Eigen::Index dim() const noexcept { return dim_; }

    const Matrix& cluster(std::size_t i) const { return clusters_.at(i); }
    auto point(std::size_t i, std::size_t j) const { return clusters_.at(i).col(static_cast<Eigen::Index>(j)); }
    const std::vector<Matrix>& clusters() const noexcept { return clusters_; }

    ClusteredSample translated(const Point& shift) const;

private:
    std::vector<Matrix> clusters_;
    std::size_t total_ = 0;
    Eigen::Index dim_ = 0;
};

enum class WeightMode { PerCluster, PerObservation };

/// Statistician-chosen positive weights, either one per cluster (w_ij = w_i)
/// or one per observation.
class WeightScheme {
public:
    static WeightScheme per_cluster(std::vector<double> weights);
    static WeightScheme per_observation(std::vector<std::vector<double>> weights);
    /// w = 1 for every cluster of the sample.
    static WeightScheme uniform(const ClusteredSample& sample);

    WeightMode mode() const noexcept { return mode_; }
    bool is_per_cluster() const noexcept { return mode_ == WeightMode::PerCluster; }

    /// Weight of observation j in cluster i.
    double weight(std::size_t i, std::size_t j) const;
    /// Sum of the weights in cluster i (w_i. in the usual notation).
    double cluster_total(std::size_t i, std::size_t cluster_size) const;

    /// Per-cluster weights; throws InputError for a per-observation scheme.
    const std::vector<double>& cluster_weights() const;

    /// Throws InputError if the layout does not match the sample.
    void check_compatible(const ClusteredSample& sample) const;

    /// Observation-level weights, cluster by cluster.
    std::vector<double> expand(const ClusteredSample& sample) const;

    /// (1/N_n) sum_ij w_ij.
    double mean_weight(const ClusteredSample& sample) const;

    /// Rescaled copy satisfying (1/N_n) sum_ij w_ij = 1.
    WeightScheme normalized(const ClusteredSample& sample) const;
    WeightScheme scaled(double factor) const;

private:
    WeightMode mode_ = WeightMode::PerCluster;
    std::vector<double> cluster_;
    std::vector<std::vector<double>> observation_;
};

enum class FamilyKind { Mean, SpatialMedian, Huber, LpMedian };

/// Location M-estimator family: the rho / psi / psi-dot triple.
class EstimatorFamily {
public:
    static constexpr double kDefaultHuberK = 1.345;

    static EstimatorFamily mean() { return EstimatorFamily(FamilyKind::Mean, 0.0); }
    static EstimatorFamily spatial_median() { return EstimatorFamily(FamilyKind::SpatialMedian, 0.0); }
    static EstimatorFamily huber(double k = kDefaultHuberK);
    static EstimatorFamily lp_median(double p);

    /// Accepts "mean", "spatial-median" (or "median"), "huber", "lp-median" (or "lp").
    static EstimatorFamily parse(std::string_view name, double huber_k = kDefaultHuberK, double lp_p = 3.0);

    FamilyKind kind() const noexcept { return kind_; }
    /// Huber k or L_p exponent p; zero for the parameter-free families.
    double parameter() const noexcept { return param_; }
    bool is_robust() const noexcept { return kind_ == FamilyKind::SpatialMedian || kind_ == FamilyKind::Huber; }

    /// Short stable label, e.g. "huber(k=1.345)".
    std::string name() const;

    friend bool operator==(const EstimatorFamily&, const EstimatorFamily&) = default;

private:
    EstimatorFamily(FamilyKind kind, double param) : kind_(kind), param_(param) {}

    FamilyKind kind_;
    double param_;
};

double rho_eval(const EstimatorFamily& fam, const Eigen::Ref<const Point>& x, const Eigen::Ref<const Point>& a);

/// Gradient of rho with respect to a. Spatial median ties return zero.
Point psi_eval(const EstimatorFamily& fam, const Eigen::Ref<const Point>& x, const Eigen::Ref<const Point>& a);

struct JacobianValue {
    Matrix value;
    /// Set when a sits on a nonsmooth locus of psi (tie for the spatial
    /// median, ||x - a|| = k for Huber); value then uses the interior branch
    /// (zero matrix for a spatial-median tie).
    bool on_nonsmooth_locus = false;
};

JacobianValue psi_jacobian(const EstimatorFamily& fam, const Eigen::Ref<const Point>& x,
                           const Eigen::Ref<const Point>& a);

/// M_n^w(a) = (1/N_n) sum_ij w_ij rho(X_ij, a).
double objective(const ClusteredSample& sample, const WeightScheme& w, const EstimatorFamily& fam,
                 const Eigen::Ref<const Point>& a);

/// T_n^w(a) = (1/N_n) sum_ij w_ij psi(X_ij, a).
Point estimating_function(const ClusteredSample& sample, const WeightScheme& w, const EstimatorFamily& fam,
                          const Eigen::Ref<const Point>& a);

}  // namespace wmest
