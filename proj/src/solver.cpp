#include "wmest/solver.hpp"

#include "wmest/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace wmest {

namespace {

struct Observation {
    Eigen::Index cluster;
    Eigen::Index column;
    double weight;
};

/// Flattened view used by the iterative solvers.
class WeightedCloud {
public:
    WeightedCloud(const ClusteredSample& sample, const WeightScheme& w) : sample_(sample) {
        w.check_compatible(sample);
        obs_.reserve(sample.total());
        for (std::size_t i = 0; i < sample.cluster_count(); ++i) {
            for (std::size_t j = 0; j < sample.cluster_size(i); ++j) {
                obs_.push_back({static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j), w.weight(i, j)});
            }
        }
        inv_n_ = 1.0 / static_cast<double>(sample.total());
    }

    auto x(const Observation& o) const { return sample_.cluster(static_cast<std::size_t>(o.cluster)).col(o.column); }
    const std::vector<Observation>& observations() const { return obs_; }
    Eigen::Index dim() const { return sample_.dim(); }
    double inv_n() const { return inv_n_; }

    double objective(const EstimatorFamily& fam, const Point& a) const {
        double s = 0.0;
        for (const auto& o : obs_) s += o.weight * rho_eval(fam, x(o), a);
        return s * inv_n_;
    }

    Point gradient(const EstimatorFamily& fam, const Point& a) const {
        Point g = Point::Zero(dim());
        for (const auto& o : obs_) g += o.weight * psi_eval(fam, x(o), a);
        return g * inv_n_;
    }

    Matrix jacobian(const EstimatorFamily& fam, const Point& a) const {
        Matrix j = Matrix::Zero(dim(), dim());
        for (const auto& o : obs_) j += o.weight * psi_jacobian(fam, x(o), a).value;
        return j * inv_n_;
    }

    bool all_identical() const {
        const Point first = x(obs_.front());
        return std::all_of(obs_.begin(), obs_.end(),
                           [&](const Observation& o) { return (x(o) - first).norm() < kTieTolerance; });
    }

private:
    const ClusteredSample& sample_;
    std::vector<Observation> obs_;
    double inv_n_ = 1.0;
};

double condition_number(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    const auto ev = es.eigenvalues().cwiseAbs();
    const double lo = ev.minCoeff();
    if (lo == 0.0) return std::numeric_limits<double>::infinity();
    return ev.maxCoeff() / lo;
}

/// Spatial-median quantities at a: the minimum-norm subgradient norm and the
/// Weiszfeld / Vardi-Zhang update.
struct WeiszfeldStep {
    double subgradient_norm;
    Point next;
    bool at_data_point;
};

WeiszfeldStep weiszfeld_step(const WeightedCloud& cloud, const Point& a) {
    const Eigen::Index d = cloud.dim();
    double tie_weight = 0.0;
    double inv_dist_sum = 0.0;
    Point weighted_pts = Point::Zero(d);
    Point resultant = Point::Zero(d);  // sum over non-tied points of w (x - a)/r
    for (const auto& o : cloud.observations()) {
        const Point diff = cloud.x(o) - a;
        const double r = diff.norm();
        if (r < kTieTolerance) {
            tie_weight += o.weight;
            continue;
        }
        inv_dist_sum += o.weight / r;
        weighted_pts += (o.weight / r) * cloud.x(o);
        resultant += (o.weight / r) * diff;
    }
    const double pull = resultant.norm();
    WeiszfeldStep step;
    step.at_data_point = tie_weight > 0.0;
    step.subgradient_norm = std::max(0.0, pull - tie_weight) * cloud.inv_n();
    if (inv_dist_sum == 0.0) {
        step.next = a;
        return step;
    }
    const Point target = weighted_pts / inv_dist_sum;
    if (!step.at_data_point || pull == 0.0) {
        step.next = target;
    } else {
        const double ratio = tie_weight / pull;
        step.next = std::max(0.0, 1.0 - ratio) * target + std::min(1.0, ratio) * a;
    }
    return step;
}

SolveResult solve_spatial_median(const WeightedCloud& cloud, const EstimatorFamily& fam, Point a,
                                 const SolveOptions& opts) {
    SolveResult res;
    double f = cloud.objective(fam, a);
    for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
        WeiszfeldStep ws = weiszfeld_step(cloud, a);
        if (ws.subgradient_norm <= opts.gradient_tolerance) break;

        // Iterates approach a minimizing data point only linearly; test the
        // nearest one directly.
        if (!ws.at_data_point) {
            const Observation* nearest = nullptr;
            double best = std::numeric_limits<double>::infinity();
            for (const auto& o : cloud.observations()) {
                const double r = (cloud.x(o) - a).norm();
                if (r < best) {
                    best = r;
                    nearest = &o;
                }
            }
            const Point vertex = cloud.x(*nearest);
            if (weiszfeld_step(cloud, vertex).subgradient_norm <= opts.gradient_tolerance) {
                a = vertex;
                ++res.iterations;
                break;
            }
        }

        Point next = ws.next;
        // Newton acceleration away from data points; kept only if it reduces the
        // score norm, otherwise the Weiszfeld update is used.
        if (!ws.at_data_point) {
            const Matrix jac = cloud.jacobian(fam, a);
            if (condition_number(jac) < opts.max_condition) {
                const Point newton = a - jac.ldlt().solve(cloud.gradient(fam, a));
                if (weiszfeld_step(cloud, newton).subgradient_norm < ws.subgradient_norm) next = newton;
            }
        }
        double f_next = cloud.objective(fam, next);
        // Damping: halve the step while the objective increases beyond rounding.
        for (int h = 0; h < 40 && f_next > f + 1e-15 * std::abs(f); ++h) {
            next = a + 0.5 * (next - a);
            f_next = cloud.objective(fam, next);
        }
        const double moved = (next - a).norm();
        a = std::move(next);
        f = f_next;
        if (moved <= opts.step_tolerance) {
            ++res.iterations;
            break;
        }
    }
    res.final_gradient_norm = weiszfeld_step(cloud, a).subgradient_norm;
    res.converged = res.final_gradient_norm <= opts.gradient_tolerance;
    res.objective_value = cloud.objective(fam, a);
    res.theta_hat = std::move(a);
    return res;
}

SolveResult solve_newton(const WeightedCloud& cloud, const EstimatorFamily& fam, Point a, const SolveOptions& opts) {
    SolveResult res;
    double f = cloud.objective(fam, a);
    Point g = cloud.gradient(fam, a);
    for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
        const double gnorm = g.norm();
        if (gnorm <= opts.gradient_tolerance) break;

        const Matrix jac = cloud.jacobian(fam, a);
        Point dir;
        if (condition_number(jac) < opts.max_condition) {
            dir = -jac.ldlt().solve(g);
        } else {
            Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (jac + jac.transpose()), Eigen::EigenvaluesOnly);
            const double curvature = es.eigenvalues().cwiseAbs().maxCoeff();
            dir = -g / (curvature > 0.0 ? curvature : 1.0);
        }
        const double slope = g.dot(dir);
        if (!(slope < 0.0)) dir = -g;

        // Backtracking: Armijo on the objective, or a strict decrease of the
        // score norm once the objective is flat to machine precision.
        double t = 1.0;
        Point next = a + dir;
        double f_next = cloud.objective(fam, next);
        Point g_next = cloud.gradient(fam, next);
        for (int h = 0; h < 60; ++h) {
            if (f_next <= f + 1e-4 * t * g.dot(dir) || g_next.norm() < gnorm) break;
            t *= 0.5;
            next = a + t * dir;
            f_next = cloud.objective(fam, next);
            g_next = cloud.gradient(fam, next);
        }
        const double moved = (next - a).norm();
        a = std::move(next);
        f = f_next;
        g = std::move(g_next);
        if (moved <= opts.step_tolerance) {
            ++res.iterations;
            break;
        }
    }
    res.final_gradient_norm = g.norm();
    res.converged = res.final_gradient_norm <= opts.gradient_tolerance;
    res.objective_value = f;
    res.theta_hat = std::move(a);
    return res;
}

}  // namespace

Point weighted_mean(const ClusteredSample& sample, const WeightScheme& w) {
    w.check_compatible(sample);
    Point sum = Point::Zero(sample.dim());
    double wsum = 0.0;
    for (std::size_t i = 0; i < sample.cluster_count(); ++i) {
        const Matrix& c = sample.cluster(i);
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
            const double wij = w.weight(i, static_cast<std::size_t>(j));
            sum += wij * c.col(j);
            wsum += wij;
        }
    }
    return sum / wsum;
}

Point coordinatewise_weighted_median(const ClusteredSample& sample, const WeightScheme& w) {
    w.check_compatible(sample);
    const Eigen::Index d = sample.dim();
    Point med(d);
    std::vector<std::pair<double, double>> col;
    col.reserve(sample.total());
    for (Eigen::Index k = 0; k < d; ++k) {
        col.clear();
        double total = 0.0;
        for (std::size_t i = 0; i < sample.cluster_count(); ++i) {
            const Matrix& c = sample.cluster(i);
            for (Eigen::Index j = 0; j < c.cols(); ++j) {
                const double wij = w.weight(i, static_cast<std::size_t>(j));
                col.emplace_back(c(k, j), wij);
                total += wij;
            }
        }
        std::sort(col.begin(), col.end());
        double cum = 0.0;
        med(k) = col.back().first;
        for (const auto& [value, weight] : col) {
            cum += weight;
            if (cum >= 0.5 * total) {
                med(k) = value;
                break;
            }
        }
    }
    return med;
}

SolveResult solve(const ClusteredSample& sample, const WeightScheme& w, const EstimatorFamily& fam,
                  const SolveOptions& opts) {
    const WeightedCloud cloud(sample, w);
    if (opts.initial && opts.initial->size() != sample.dim()) throw InputError("initial point has the wrong dimension");

    if (cloud.all_identical()) {
        SolveResult res;
        res.theta_hat = sample.cluster(0).col(0);
        res.converged = true;
        res.objective_value = cloud.objective(fam, res.theta_hat);
        return res;
    }

    if (fam.kind() == FamilyKind::Mean) {
        SolveResult res;
        res.theta_hat = weighted_mean(sample, w);
        res.final_gradient_norm = cloud.gradient(fam, res.theta_hat).norm();
        res.converged = res.final_gradient_norm <= opts.gradient_tolerance;
        res.objective_value = cloud.objective(fam, res.theta_hat);
        return res;
    }

    Point start;
    if (opts.initial) {
        start = *opts.initial;
    } else {
        start = fam.is_robust() ? coordinatewise_weighted_median(sample, w) : weighted_mean(sample, w);
    }
    if (fam.kind() == FamilyKind::SpatialMedian) return solve_spatial_median(cloud, fam, std::move(start), opts);
    return solve_newton(cloud, fam, std::move(start), opts);
}

}  // namespace wmest
