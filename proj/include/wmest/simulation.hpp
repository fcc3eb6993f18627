#pragma once

#include "wmest/asymptotics.hpp"
#include "wmest/model.hpp"
#include "wmest/weight_design.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wmest {

/// Cluster sizes of a simulation design. C1-C4 are the four 100-observation,
/// ten-cluster designs; anything else is "custom".
struct ClusterConfiguration {
    std::string name = "custom";
    std::vector<std::size_t> sizes;

    /// "C1".."C4" (case-insensitive).
    static ClusterConfiguration named(std::string_view name);
    static ClusterConfiguration custom(std::vector<std::size_t> sizes);

    std::size_t total() const;
};

enum class DistributionFamily { Gaussian, Student, Cauchy };

/// Exchangeable cluster law: every pair within a cluster has component
/// correlation rho, components are independent with unit scale.
struct DistributionSpec {
    DistributionFamily family = DistributionFamily::Gaussian;
    double nu = 1.0;  ///< degrees of freedom (Student); forced to 1 for Cauchy
    double rho = 0.2;
    Eigen::Index dim = 2;
    Point theta = Point::Zero(2);

    static DistributionSpec gaussian(double rho, Eigen::Index dim = 2);
    static DistributionSpec student(double nu, double rho, Eigen::Index dim = 2);
    static DistributionSpec cauchy(double rho, Eigen::Index dim = 2);

    void validate() const;
    /// "gaussian", "student3", "cauchy", ...
    std::string label() const;
    double effective_nu() const { return family == DistributionFamily::Cauchy ? 1.0 : nu; }
};

/// Seed of replication r derived from the master seed by a SplitMix64 counter split.
std::uint64_t replication_seed(std::uint64_t master, std::uint64_t replication);

/// Gaussian: X_ij = theta + sqrt(rho) Z_i + sqrt(1 - rho) e_ij with standard
/// normal Z_i, e_ij. Student(nu): the Gaussian deviation of cluster i is divided
/// by one cluster-shared sqrt(chi2_nu / nu). Deterministic given seed.
ClusteredSample generate_sample(const ClusterConfiguration& cfg, const DistributionSpec& dist, std::uint64_t seed);

enum class WeightsSource { Unweighted, Optimal, File };
enum class EvalPoint { TrueTheta, Estimated };

struct ExperimentConfig {
    ClusterConfiguration configuration = ClusterConfiguration::named("C1");
    DistributionSpec distribution;
    std::vector<EstimatorFamily> estimators;
    WeightsSource weights_source = WeightsSource::Optimal;
    /// Per-cluster weights used when weights_source == File.
    std::vector<double> file_weights;
    std::size_t replications = 500;
    std::uint64_t seed = 20150101;
    EvalPoint eval_point = EvalPoint::TrueTheta;
    /// Cross-reference estimator; defaults to the mean for Gaussian data and the
    /// spatial median otherwise.
    std::optional<EstimatorFamily> reference;
    unsigned threads = 1;
    WeightOptimizationOptions optimizer;

    void validate() const;
    EstimatorFamily reference_family() const;
};

struct EstimatorReport {
    EstimatorFamily family = EstimatorFamily::mean();
    std::vector<double> weights;
    Matrix sigma_unweighted;
    Matrix sigma_weighted;
    /// [det(Sigma) / det(Sigma^w)]^(1/d) from replication-averaged moments.
    double efficiency = 0.0;
    /// Batch-means standard error of the efficiency (NaN below 20 replications).
    double efficiency_stderr = 0.0;
    /// [det(Sigma^w) / det(Sigma^w_reference)]^(1/d).
    double ratio_weighted_vs_reference = 0.0;
    /// [det(Sigma) / det(Sigma_reference)]^(1/d).
    double ratio_unweighted_vs_reference = 0.0;
    std::vector<Point> theta_weighted;
    std::vector<Point> theta_unweighted;
    /// 1 where the solver converged, per replication.
    std::vector<std::uint8_t> converged_weighted;
    std::vector<std::uint8_t> converged_unweighted;
    /// Replications whose covariance pieces could not be computed.
    std::size_t failed_replications = 0;
    bool weights_converged = true;
};

struct ReportRow {
    std::string config;
    std::string distribution;
    double rho = 0.0;
    std::string estimator;
    std::string metric;
    double value = 0.0;
    std::optional<double> stderr_value;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<EstimatorReport> estimators;
    std::string reference;

    const EstimatorReport& find(const EstimatorFamily& fam) const;
    std::vector<ReportRow> rows() const;
};

/// Replications are independent; per-replication seeds and index-ordered
/// aggregation make the report independent of the thread count.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Averages ClusterMoments at the true location over replications of a design.
ClusterMoments averaged_moments(const ClusterConfiguration& cfg, const DistributionSpec& dist,
                                const EstimatorFamily& fam, std::size_t replications, std::uint64_t seed,
                                unsigned threads = 1);

/// Optimal weights for one estimator of an experiment: moments averaged over
/// the configured replications at the true location, or at each replication's
/// unweighted estimate when eval_point is Estimated.
WeightOptimizationResult design_weights(const ExperimentConfig& cfg, const EstimatorFamily& fam);

}  // namespace wmest
