#include "wmest/weight_design.hpp"

#include "wmest/errors.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>

namespace wmest {

namespace {

constexpr double kInfeasible = std::numeric_limits<double>::max();

double weighted_size_sum(std::span<const std::size_t> sizes, std::span<const double> w) {
    double s = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) s += static_cast<double>(sizes[i]) * w[i];
    return s;
}

/// Normalizes onto {sum m_i w_i = N_n, w_i >= floor}: floored coordinates are
/// pinned and the free ones rescaled until no new coordinate hits the floor.
std::vector<double> project(std::span<const std::size_t> sizes, std::vector<double> w, double floor) {
    const double total = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
    std::vector<bool> pinned(w.size(), false);
    for (std::size_t round = 0; round <= w.size(); ++round) {
        double pinned_mass = 0.0;
        double free_mass = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            (pinned[i] ? pinned_mass : free_mass) += static_cast<double>(sizes[i]) * (pinned[i] ? floor : w[i]);
        }
        if (free_mass <= 0.0) break;
        const double scale = (total - pinned_mass) / free_mass;
        bool changed = false;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (pinned[i]) {
                w[i] = floor;
                continue;
            }
            w[i] *= scale;
            if (w[i] < floor) {
                pinned[i] = true;
                changed = true;
            }
        }
        if (!changed) break;
    }
    return w;
}

class DetObjective {
public:
    DetObjective(const ClusterMoments& moments, double floor) : moments_(moments), floor_(floor) {}

    /// log det Sigma at the projection of w; kInfeasible where undefined.
    double log_det(const std::vector<double>& w) const {
        const double det = moments_.sandwich_det(project(moments_.sizes(), w, floor_));
        if (!(det > 0.0) || !std::isfinite(det)) return kInfeasible;
        return std::log(det);
    }

    std::vector<double> feasible(std::vector<double> w) const { return project(moments_.sizes(), std::move(w), floor_); }

private:
    const ClusterMoments& moments_;
    double floor_;
};

struct NelderMeadResult {
    std::vector<double> log_weights;
    double value;
};

NelderMeadResult nelder_mead(const DetObjective& obj, std::vector<double> start, double step, std::size_t max_iter) {
    const std::size_t n = start.size();
    auto eval = [&](const std::vector<double>& u) {
        std::vector<double> w(n);
        std::transform(u.begin(), u.end(), w.begin(), [](double x) { return std::exp(x); });
        return obj.log_det(w);
    };
    std::vector<std::vector<double>> simplex(n + 1, start);
    std::vector<double> values(n + 1);
    for (std::size_t k = 0; k < n; ++k) simplex[k + 1][k] += step;
    for (std::size_t k = 0; k <= n; ++k) values[k] = eval(simplex[k]);

    std::vector<std::size_t> order(n + 1);
    for (std::size_t it = 0; it < max_iter; ++it) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[n - 1];
        if (std::abs(values[worst] - values[best]) < 1e-14) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t k = 0; k <= n; ++k) {
            if (k == worst) continue;
            for (std::size_t c = 0; c < n; ++c) centroid[c] += simplex[k][c] / static_cast<double>(n);
        }
        auto along = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t c = 0; c < n; ++c) p[c] = centroid[c] + t * (simplex[worst][c] - centroid[c]);
            return p;
        };
        std::vector<double> reflected = along(-1.0);
        const double fr = eval(reflected);
        if (fr < values[best]) {
            std::vector<double> expanded = along(-2.0);
            const double fe = eval(expanded);
            if (fe < fr) {
                simplex[worst] = std::move(expanded);
                values[worst] = fe;
            } else {
                simplex[worst] = std::move(reflected);
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second]) {
            simplex[worst] = std::move(reflected);
            values[worst] = fr;
            continue;
        }
        std::vector<double> contracted = fr < values[worst] ? along(-0.5) : along(0.5);
        const double fc = eval(contracted);
        if (fc < std::min(fr, values[worst])) {
            simplex[worst] = std::move(contracted);
            values[worst] = fc;
            continue;
        }
        for (std::size_t k = 0; k <= n; ++k) {
            if (k == best) continue;
            for (std::size_t c = 0; c < n; ++c) simplex[k][c] = simplex[best][c] + 0.5 * (simplex[k][c] - simplex[best][c]);
            values[k] = eval(simplex[k]);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    return {simplex[best], values[best]};
}

}  // namespace

std::vector<double> normalize_cluster_weights(std::span<const std::size_t> sizes, std::span<const double> weights) {
    if (sizes.size() != weights.size()) throw InputError("weights and sizes differ in length");
    const double total = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
    const double scale = total / weighted_size_sum(sizes, weights);
    std::vector<double> out(weights.begin(), weights.end());
    for (double& w : out) w *= scale;
    return out;
}

std::vector<std::pair<std::size_t, double>> group_mean_weights(std::span<const std::size_t> sizes,
                                                               std::span<const double> weights) {
    if (sizes.size() != weights.size()) throw InputError("weights and sizes differ in length");
    std::map<std::size_t, std::pair<double, std::size_t>> acc;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        auto& [sum, count] = acc[sizes[i]];
        sum += weights[i];
        ++count;
    }
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& [m, sc] : acc) out.emplace_back(m, sc.first / static_cast<double>(sc.second));
    return out;
}

WeightOptimizationResult optimize_weights(const ClusterMoments& moments, const WeightOptimizationOptions& opts) {
    const std::size_t n = moments.cluster_count();
    if (n < 2) throw InputError("weight optimization needs at least two clusters");
    if (!(opts.floor > 0.0)) throw InputError("weight floor must be positive");
    const auto sizes = moments.sizes();
    if (opts.floor >= 1.0) throw InputError("weight floor leaves no feasible weights");
    const DetObjective obj(moments, opts.floor);

    WeightOptimizationResult res;
    std::vector<double> w = obj.feasible(std::vector<double>(n, 1.0));
    const double unweighted = obj.log_det(w);
    if (unweighted == kInfeasible) throw NumericalError("unweighted sandwich covariance is singular");
    res.unweighted_objective = std::exp(unweighted);

    // Projected coordinate descent in log-weight space; the objective is
    // invariant to a common rescaling, so normalizing after each move is exact.
    double f = unweighted;
    for (res.iterations = 0; res.iterations < opts.max_sweeps;) {
        const double f_start = f;
        for (std::size_t i = 0; i < n; ++i) {
            const double u0 = std::log(w[i]);
            auto line = [&](double u) {
                std::vector<double> trial = w;
                trial[i] = std::exp(u);
                return obj.log_det(trial);
            };
            std::uintmax_t max_iter = 200;
            const auto [u_best, f_best] = boost::math::tools::brent_find_minima(
                line, u0 - 4.0, u0 + 4.0, std::numeric_limits<double>::digits / 2, max_iter);
            if (f_best < f) {
                w[i] = std::exp(u_best);
                w = obj.feasible(std::move(w));
                f = obj.log_det(w);
            }
        }
        ++res.iterations;
        res.trace.push_back(std::exp(f));
        if (f_start - f < opts.tolerance) {
            res.converged = true;
            break;
        }
    }

    if (opts.nelder_mead_check) {
        std::vector<double> u(n);
        std::transform(w.begin(), w.end(), u.begin(), [](double x) { return std::log(x); });
        double step = 0.2;
        for (std::size_t r = 0; r < opts.nelder_mead_restarts; ++r, step *= 0.5) {
            const NelderMeadResult nm = nelder_mead(obj, u, step, 400 * n);
            if (nm.value < f) {
                u = nm.log_weights;
                std::vector<double> cand(n);
                std::transform(u.begin(), u.end(), cand.begin(), [](double x) { return std::exp(x); });
                w = obj.feasible(std::move(cand));
                f = obj.log_det(w);
            }
        }
    }

    if (opts.symmetrize_groups) {
        std::map<std::size_t, std::pair<double, std::size_t>> acc;
        for (std::size_t i = 0; i < n; ++i) {
            acc[sizes[i]].first += w[i];
            ++acc[sizes[i]].second;
        }
        std::vector<double> sym(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& [sum, count] = acc[sizes[i]];
            sym[i] = sum / static_cast<double>(count);
        }
        sym = obj.feasible(std::move(sym));
        const double f_sym = obj.log_det(sym);
        if (f_sym <= unweighted) {
            w = std::move(sym);
            f = f_sym;
        }
    }

    res.weights = std::move(w);
    res.objective = std::exp(f);
    return res;
}

WeightOptimizationResult optimize_weights(const ClusteredSample& sample, const EstimatorFamily& fam,
                                          const Eigen::Ref<const Point>& a, const WeightOptimizationOptions& opts) {
    return optimize_weights(ClusterMoments::compute(sample, fam, a), opts);
}

std::vector<double> closed_form_weights(std::span<const std::size_t> sizes, double tau) {
    if (!(tau >= 0.0 && tau < 1.0)) throw InputError("tau must lie in [0, 1)");
    if (sizes.empty()) throw InputError("no cluster sizes given");
    std::vector<double> w;
    w.reserve(sizes.size());
    for (std::size_t m : sizes) {
        if (m == 0) throw InputError("cluster sizes must be positive");
        w.push_back(1.0 / (1.0 + (static_cast<double>(m) - 1.0) * tau));
    }
    return normalize_cluster_weights(sizes, w);
}

ClusterMoments equicorrelated_moments(std::span<const std::size_t> sizes, double tau, Eigen::Index dim) {
    ClusterMoments mom(std::vector<std::size_t>(sizes.begin(), sizes.end()), dim);
    const Matrix eye = Matrix::Identity(dim, dim);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const double m = static_cast<double>(sizes[i]);
        mom.outer(i) = m * eye;
        mom.cross(i) = m * (m - 1.0) * tau * eye;
        mom.jacobian(i) = m * eye;
    }
    return mom;
}

}  // namespace wmest
