#include "wmest/simulation.hpp"

#include "wmest/errors.hpp"
#include "wmest/solver.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

namespace wmest {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Runs body(r) for r in [0, count) on up to `threads` workers. Each index is
/// processed exactly once; results must be written to per-index slots.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, count));
    if (workers == 1) {
        for (std::size_t r = 0; r < count; ++r) body(r);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t r = t; r < count; r += workers) body(r);
        });
    }
}

double root_det_ratio(const Matrix& num, const Matrix& den) {
    return std::pow(num.determinant() / den.determinant(), 1.0 / static_cast<double>(num.rows()));
}

ClusterMoments mean_of(const std::vector<ClusterMoments>& per_rep, std::size_t begin, std::size_t end) {
    ClusterMoments acc;
    std::size_t used = 0;
    for (std::size_t r = begin; r < end; ++r) {
        if (per_rep[r].cluster_count() == 0) continue;
        acc += per_rep[r];
        ++used;
    }
    if (used == 0) throw NumericalError("no replication produced usable covariance moments");
    acc *= 1.0 / static_cast<double>(used);
    return acc;
}

/// Work for one estimator family over all replications.
EstimatorReport run_family(const ExperimentConfig& cfg, const std::vector<ClusteredSample>& samples,
                           const EstimatorFamily& fam) {
    const std::size_t reps = samples.size();
    const std::size_t n = cfg.configuration.sizes.size();
    const Point& theta = cfg.distribution.theta;
    const bool at_truth = cfg.eval_point == EvalPoint::TrueTheta;
    const std::vector<double> ones(n, 1.0);

    EstimatorReport rep;
    rep.family = fam;
    rep.theta_unweighted.resize(reps);
    rep.converged_unweighted.resize(reps);
    std::vector<ClusterMoments> unw_moments(reps);
    std::vector<char> failed(reps, 0);

    parallel_for(reps, cfg.threads, [&](std::size_t r) {
        try {
            const WeightScheme w = WeightScheme::per_cluster(ones);
            const SolveResult s = solve(samples[r], w, fam);
            rep.theta_unweighted[r] = s.theta_hat;
            rep.converged_unweighted[r] = s.converged;
            unw_moments[r] = ClusterMoments::compute(samples[r], fam, at_truth ? theta : s.theta_hat);
        } catch (const std::exception&) {
            failed[r] = 1;
        }
    });
    const ClusterMoments unw_mean = mean_of(unw_moments, 0, reps);

    switch (cfg.weights_source) {
        case WeightsSource::Unweighted: rep.weights = ones; break;
        case WeightsSource::File:
            rep.weights = normalize_cluster_weights(cfg.configuration.sizes, cfg.file_weights);
            break;
        case WeightsSource::Optimal: {
            const WeightOptimizationResult opt = optimize_weights(unw_mean, cfg.optimizer);
            rep.weights = opt.weights;
            rep.weights_converged = opt.converged;
            break;
        }
    }

    rep.theta_weighted.resize(reps);
    rep.converged_weighted.resize(reps);
    std::vector<ClusterMoments> w_moments(at_truth ? 0 : reps);
    parallel_for(reps, cfg.threads, [&](std::size_t r) {
        try {
            const WeightScheme w = WeightScheme::per_cluster(rep.weights);
            const SolveResult s = solve(samples[r], w, fam);
            rep.theta_weighted[r] = s.theta_hat;
            rep.converged_weighted[r] = s.converged;
            if (!at_truth) w_moments[r] = ClusterMoments::compute(samples[r], fam, s.theta_hat);
        } catch (const std::exception&) {
            failed[r] = 1;
        }
    });
    rep.failed_replications = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));

    const std::vector<ClusterMoments>& weighted_source = at_truth ? unw_moments : w_moments;
    const ClusterMoments w_mean = at_truth ? unw_mean : mean_of(w_moments, 0, reps);
    rep.sigma_unweighted = unw_mean.sandwich(ones, theta, fam.name()).Sigma_hat;
    rep.sigma_weighted = w_mean.sandwich(rep.weights, theta, fam.name()).Sigma_hat;
    rep.efficiency = relative_efficiency(rep.sigma_unweighted, rep.sigma_weighted);

    constexpr std::size_t kBatches = 10;
    rep.efficiency_stderr = std::numeric_limits<double>::quiet_NaN();
    if (reps >= 2 * kBatches) {
        std::vector<double> eff;
        for (std::size_t b = 0; b < kBatches; ++b) {
            const std::size_t lo = b * reps / kBatches;
            const std::size_t hi = (b + 1) * reps / kBatches;
            try {
                const Matrix su = mean_of(unw_moments, lo, hi).sandwich(ones, theta, fam.name()).Sigma_hat;
                const Matrix sw = mean_of(weighted_source, lo, hi).sandwich(rep.weights, theta, fam.name()).Sigma_hat;
                eff.push_back(relative_efficiency(su, sw));
            } catch (const std::exception&) {
            }
        }
        if (eff.size() >= 2) {
            const double m = std::accumulate(eff.begin(), eff.end(), 0.0) / static_cast<double>(eff.size());
            double ss = 0.0;
            for (double e : eff) ss += (e - m) * (e - m);
            rep.efficiency_stderr = std::sqrt(ss / static_cast<double>(eff.size() - 1) / static_cast<double>(eff.size()));
        }
    }
    return rep;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

ClusterConfiguration ClusterConfiguration::named(std::string_view name) {
    const std::string key = lower(name);
    ClusterConfiguration cfg;
    if (key == "c1") {
        cfg.sizes.assign(9, 4);
        cfg.sizes.push_back(64);
    } else if (key == "c2") {
        cfg.sizes.assign(5, 4);
        cfg.sizes.insert(cfg.sizes.end(), 5, 16);
    } else if (key == "c3") {
        cfg.sizes = {4, 4, 8};
        cfg.sizes.insert(cfg.sizes.end(), 7, 12);
    } else if (key == "c4") {
        cfg.sizes = {5, 6, 7, 8, 9, 11, 12, 13, 14, 15};
    } else {
        throw InputError("unknown cluster configuration '" + std::string(name) + "'");
    }
    cfg.name = "C" + key.substr(1);
    return cfg;
}

ClusterConfiguration ClusterConfiguration::custom(std::vector<std::size_t> sizes) {
    if (sizes.empty()) throw InputError("a configuration needs at least one cluster");
    if (std::find(sizes.begin(), sizes.end(), std::size_t{0}) != sizes.end()) {
        throw InputError("cluster sizes must be positive");
    }
    return ClusterConfiguration{"custom", std::move(sizes)};
}

std::size_t ClusterConfiguration::total() const {
    return std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
}

DistributionSpec DistributionSpec::gaussian(double rho, Eigen::Index dim) {
    DistributionSpec d;
    d.family = DistributionFamily::Gaussian;
    d.rho = rho;
    d.dim = dim;
    d.theta = Point::Zero(dim);
    d.validate();
    return d;
}

DistributionSpec DistributionSpec::student(double nu, double rho, Eigen::Index dim) {
    DistributionSpec d = gaussian(rho, dim);
    d.family = DistributionFamily::Student;
    d.nu = nu;
    d.validate();
    return d;
}

DistributionSpec DistributionSpec::cauchy(double rho, Eigen::Index dim) {
    DistributionSpec d = gaussian(rho, dim);
    d.family = DistributionFamily::Cauchy;
    d.nu = 1.0;
    return d;
}

void DistributionSpec::validate() const {
    if (!(rho > 0.0 && rho < 1.0)) throw InputError("intra-cluster correlation rho must lie in (0, 1)");
    if (dim < 1) throw InputError("dimension must be at least 1");
    if (theta.size() != dim) throw InputError("true location has the wrong dimension");
    if (family == DistributionFamily::Student && !(nu >= 1.0)) throw InputError("degrees of freedom must be >= 1");
}

std::string DistributionSpec::label() const {
    switch (family) {
        case DistributionFamily::Gaussian: return "gaussian";
        case DistributionFamily::Cauchy: return "cauchy";
        case DistributionFamily::Student: {
            std::string s = std::to_string(nu);
            s.erase(s.find_last_not_of('0') + 1);
            if (!s.empty() && s.back() == '.') s.pop_back();
            return "student" + s;
        }
    }
    return "unknown";
}

std::uint64_t replication_seed(std::uint64_t master, std::uint64_t replication) {
    return splitmix64(splitmix64(master) ^ splitmix64(replication + 0x632be59bd9b4e019ULL));
}

ClusteredSample generate_sample(const ClusterConfiguration& cfg, const DistributionSpec& dist, std::uint64_t seed) {
    dist.validate();
    if (cfg.sizes.empty()) throw InputError("configuration has no clusters");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const bool heavy = dist.family != DistributionFamily::Gaussian;
    std::chi_squared_distribution<double> chi2(dist.effective_nu());
    const double shared = std::sqrt(dist.rho);
    const double own = std::sqrt(1.0 - dist.rho);

    std::vector<Matrix> clusters;
    clusters.reserve(cfg.sizes.size());
    for (std::size_t m : cfg.sizes) {
        if (m == 0) throw InputError("cluster sizes must be positive");
        Point common(dist.dim);
        for (Eigen::Index c = 0; c < dist.dim; ++c) common(c) = normal(rng);
        Matrix pts(dist.dim, static_cast<Eigen::Index>(m));
        for (Eigen::Index j = 0; j < pts.cols(); ++j) {
            for (Eigen::Index c = 0; c < dist.dim; ++c) pts(c, j) = shared * common(c) + own * normal(rng);
        }
        if (heavy) pts /= std::sqrt(chi2(rng) / dist.effective_nu());
        pts.colwise() += dist.theta;
        clusters.push_back(std::move(pts));
    }
    return ClusteredSample(std::move(clusters));
}

void ExperimentConfig::validate() const {
    if (configuration.sizes.empty()) throw InputError("experiment configuration has no clusters");
    distribution.validate();
    if (estimators.empty()) throw InputError("experiment needs at least one estimator");
    if (replications < 1) throw InputError("replications must be >= 1");
    if (weights_source == WeightsSource::File && file_weights.size() != configuration.sizes.size()) {
        throw InputError("weights file does not match the number of clusters");
    }
    if (weights_source == WeightsSource::Optimal && configuration.sizes.size() < 2) {
        throw InputError("optimal weights need at least two clusters");
    }
}

EstimatorFamily ExperimentConfig::reference_family() const {
    if (reference) return *reference;
    return distribution.family == DistributionFamily::Gaussian ? EstimatorFamily::mean()
                                                               : EstimatorFamily::spatial_median();
}

const EstimatorReport& ExperimentReport::find(const EstimatorFamily& fam) const {
    for (const auto& e : estimators) {
        if (e.family == fam) return e;
    }
    throw InputError("estimator " + fam.name() + " is not part of the report");
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentReport report;
    report.config = cfg;
    const EstimatorFamily ref = cfg.reference_family();
    report.reference = ref.name();

    std::vector<ClusteredSample> samples;
    samples.reserve(cfg.replications);
    for (std::size_t r = 0; r < cfg.replications; ++r) {
        samples.push_back(generate_sample(cfg.configuration, cfg.distribution, replication_seed(cfg.seed, r)));
    }

    for (const auto& fam : cfg.estimators) report.estimators.push_back(run_family(cfg, samples, fam));
    const auto it = std::find(cfg.estimators.begin(), cfg.estimators.end(), ref);
    const EstimatorReport ref_rep = it != cfg.estimators.end() ? report.estimators[static_cast<std::size_t>(it - cfg.estimators.begin())]
                                                              : run_family(cfg, samples, ref);
    for (auto& e : report.estimators) {
        e.ratio_weighted_vs_reference = root_det_ratio(e.sigma_weighted, ref_rep.sigma_weighted);
        e.ratio_unweighted_vs_reference = root_det_ratio(e.sigma_unweighted, ref_rep.sigma_unweighted);
    }
    return report;
}

std::vector<ReportRow> ExperimentReport::rows() const {
    std::vector<ReportRow> out;
    const std::string cfg_name = config.configuration.name;
    const std::string dist = config.distribution.label();
    const double rho = config.distribution.rho;
    for (const auto& e : estimators) {
        auto add = [&](std::string metric, double value, std::optional<double> se = std::nullopt) {
            out.push_back({cfg_name, dist, rho, e.family.name(), std::move(metric), value, se});
        };
        add("efficiency", e.efficiency, std::isnan(e.efficiency_stderr) ? std::nullopt : std::optional(e.efficiency_stderr));
        add("ratio_weighted_vs_reference", e.ratio_weighted_vs_reference);
        add("ratio_unweighted_vs_reference", e.ratio_unweighted_vs_reference);
        add("det_sigma_unweighted", e.sigma_unweighted.determinant());
        add("det_sigma_weighted", e.sigma_weighted.determinant());
        for (Eigen::Index k = 0; k < e.sigma_weighted.rows(); ++k) {
            for (Eigen::Index l = 0; l < e.sigma_weighted.cols(); ++l) {
                const std::string idx = std::to_string(k) + std::to_string(l);
                add("sigma_unweighted_" + idx, e.sigma_unweighted(k, l));
                add("sigma_weighted_" + idx, e.sigma_weighted(k, l));
            }
        }
        auto add_theta = [&](const std::string& prefix, const std::vector<Point>& thetas) {
            const Eigen::Index d = config.distribution.dim;
            for (Eigen::Index k = 0; k < d; ++k) {
                double s = 0.0, ss = 0.0;
                std::size_t cnt = 0;
                for (const auto& t : thetas) {
                    if (t.size() != d) continue;
                    s += t(k);
                    ss += t(k) * t(k);
                    ++cnt;
                }
                if (cnt == 0) continue;
                const double m = s / static_cast<double>(cnt);
                const double var = cnt > 1 ? (ss - static_cast<double>(cnt) * m * m) / static_cast<double>(cnt - 1) : 0.0;
                add(prefix + std::to_string(k), m, std::sqrt(std::max(0.0, var) / static_cast<double>(cnt)));
            }
        };
        add_theta("theta_hat_weighted_", e.theta_weighted);
        add_theta("theta_hat_unweighted_", e.theta_unweighted);
        add("nonconverged_weighted",
            static_cast<double>(std::count(e.converged_weighted.begin(), e.converged_weighted.end(), std::uint8_t{0})));
        add("nonconverged_unweighted",
            static_cast<double>(std::count(e.converged_unweighted.begin(), e.converged_unweighted.end(), std::uint8_t{0})));
        add("failed_replications", static_cast<double>(e.failed_replications));
        for (std::size_t i = 0; i < e.weights.size(); ++i) add("weight_" + std::to_string(i + 1), e.weights[i]);
    }
    return out;
}

ClusterMoments averaged_moments(const ClusterConfiguration& cfg, const DistributionSpec& dist,
                                const EstimatorFamily& fam, std::size_t replications, std::uint64_t seed,
                                unsigned threads) {
    if (replications < 1) throw InputError("replications must be >= 1");
    std::vector<ClusterMoments> per_rep(replications);
    parallel_for(replications, threads, [&](std::size_t r) {
        per_rep[r] = ClusterMoments::compute(generate_sample(cfg, dist, replication_seed(seed, r)), fam, dist.theta);
    });
    return mean_of(per_rep, 0, replications);
}

WeightOptimizationResult design_weights(const ExperimentConfig& cfg, const EstimatorFamily& fam) {
    cfg.validate();
    if (cfg.configuration.sizes.size() < 2) throw InputError("optimal weights need at least two clusters");
    if (cfg.eval_point == EvalPoint::TrueTheta) {
        return optimize_weights(averaged_moments(cfg.configuration, cfg.distribution, fam, cfg.replications, cfg.seed,
                                                 cfg.threads),
                                cfg.optimizer);
    }
    const std::vector<double> ones(cfg.configuration.sizes.size(), 1.0);
    std::vector<ClusterMoments> per_rep(cfg.replications);
    parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
        try {
            const ClusteredSample s = generate_sample(cfg.configuration, cfg.distribution, replication_seed(cfg.seed, r));
            per_rep[r] = ClusterMoments::compute(s, fam, solve(s, WeightScheme::per_cluster(ones), fam).theta_hat);
        } catch (const std::exception&) {
        }
    });
    return optimize_weights(mean_of(per_rep, 0, cfg.replications), cfg.optimizer);
}

}  // namespace wmest
