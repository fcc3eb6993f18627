// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any fails.

#include "oracles.hpp"
#include "wmest/breakdown.hpp"
#include "wmest/reproduce.hpp"
#include "wmest/simulation.hpp"
#include "wmest/solver.hpp"
#include "wmest/weight_design.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace wmest;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double time_limit, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > time_limit) {
        o.pass = false;
        o.detail += " [runtime limit " + std::to_string(time_limit) + "s exceeded]";
    }
    if (!o.pass) ++failures;
    std::printf("criterion %d %s: %s (%s; %.2fs)\n", id, o.pass ? "PASS" : "FAIL", title.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

/// Checks one column of a reproduced table; returns the failing cells as text.
Outcome check_column(const ReproducedTable& t, const std::string& column) {
    std::ostringstream bad;
    std::size_t checked = 0, failed = 0;
    for (const auto& r : t.rows) {
        const auto& c = r.cell(column);
        ++checked;
        if (!c.pass().value_or(false)) {
            ++failed;
            bad << ' ' << r.config << '/' << r.rho << '/' << r.estimator << '=' << c.value << " vs " << c.reference.value_or(0);
        }
    }
    std::ostringstream os;
    os << checked << " cells, " << failed << " outside tolerance" << bad.str();
    return {checked > 0 && failed == 0, os.str()};
}

}  // namespace

int main() {
    criterion(1, "breakdown table from stored optimal weights within 1 percentage point", 1.0, [] {
        return check_column(reproduce_table(TableKind::Breakdown), "epsilon_percent");
    });

    criterion(2, "unweighted spatial median breakdown at N = 100 is 49/100", 1.0, [] {
        const Fraction f = spatial_median_eps(100);
        return Outcome{f == Fraction{49, 100}, std::to_string(f.num) + "/" + std::to_string(f.den)};
    });

    criterion(3, "Gaussian efficiencies (C1, C2; mean, spatial median, Huber) within 15%", 300.0, [] {
        ReproduceOptions o;
        o.configs = {"C1", "C2"};
        o.estimators = {"mean", "median", "huber"};
        return check_column(reproduce_table(TableKind::EfficiencyGaussian, o), "efficiency");
    });

    criterion(4, "optimal spatial median weights for Gaussian C1, rho = 0.2", 120.0, [] {
        const auto cfg = ClusterConfiguration::named("C1");
        const auto mom = averaged_moments(cfg, DistributionSpec::gaussian(0.2), EstimatorFamily::spatial_median(), 500,
                                          20150101);
        const auto w = optimize_weights(mom).weights;
        double small = 0.0;
        for (std::size_t i = 0; i < 9; ++i) small += w[i] / 9.0;
        const double big = w[9];
        std::ostringstream os;
        os << "big cluster " << big << ", size-4 group mean " << small;
        return Outcome{big >= 0.25 && big <= 0.35 && small >= 2.1 && small <= 2.4, os.str()};
    });

    criterion(5, "optimizer matches closed-form weights within 2% on 20 random instances", 60.0, [] {
        std::mt19937_64 rng(2015);
        std::uniform_int_distribution<std::size_t> m(1, 64), n(2, 12);
        std::uniform_real_distribution<double> t(0.01, 0.95);
        double worst = 0.0;
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<std::size_t> sizes(n(rng));
            for (auto& s : sizes) s = m(rng);
            const double tau = t(rng);
            const auto opt = optimize_weights(equicorrelated_moments(sizes, tau)).weights;
            const auto ref = closed_form_weights(sizes, tau);
            for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(opt[i] / ref[i] - 1.0));
        }
        std::ostringstream os;
        os << "worst relative deviation " << worst;
        return Outcome{worst <= 0.02, os.str()};
    });

    criterion(6, "CLT: empirical covariance of the weighted mean matches the sandwich within 10%", 300.0, [] {
        ExperimentConfig cfg;
        cfg.configuration = ClusterConfiguration::named("C2");
        cfg.distribution = DistributionSpec::gaussian(0.2);
        cfg.estimators = {EstimatorFamily::mean()};
        cfg.replications = 2000;
        cfg.eval_point = EvalPoint::Estimated;
        const auto rep = run_experiment(cfg);
        const auto& e = rep.estimators.front();
        const double root_n = std::sqrt(static_cast<double>(cfg.configuration.total()));
        std::vector<Point> scaled;
        for (const auto& th : e.theta_weighted) scaled.push_back(root_n * (th - cfg.distribution.theta));
        const Matrix emp = oracle::sample_covariance(scaled);
        const Matrix& sig = e.sigma_weighted;
        bool ok = true;
        double worst = 0.0;
        for (Eigen::Index k = 0; k < 2; ++k) {
            for (Eigen::Index l = 0; l < 2; ++l) {
                const double scale = k == l ? sig(k, k) : std::sqrt(sig(k, k) * sig(l, l));
                const double dev = std::abs(emp(k, l) - sig(k, l)) / scale;
                worst = std::max(worst, dev);
                ok = ok && dev <= 0.10;
            }
        }
        std::ostringstream os;
        os << "empirical diag (" << emp(0, 0) << ", " << emp(1, 1) << "), sandwich diag (" << sig(0, 0) << ", "
           << sig(1, 1) << "), worst scaled deviation " << worst;
        return Outcome{ok, os.str()};
    });

    criterion(7, "psi and psi-jacobian match finite differences on 1000 draws", 60.0, [] {
        const auto r = oracle::gradient_suite(20150101, 1000);
        std::ostringstream os;
        os << r.checked << " draws, worst psi " << r.worst_psi << ", worst jacobian " << r.worst_jacobian;
        return Outcome{r.psi_failures == 0 && r.jacobian_failures == 0, os.str()};
    });

    criterion(8, "breakdown vs subset enumeration (N <= 16) and spatial median vs grid search", 120.0, [] {
        std::mt19937_64 rng(8);
        std::gamma_distribution<double> g(0.7, 1.0);
        std::uniform_real_distribution<double> eps(0.05, 0.95), u(0.2, 3.0);
        std::normal_distribution<double> z(0.0, 3.0);
        std::size_t mismatches = 0, cases = 0;
        for (std::size_t n = 1; n <= 16; ++n) {
            for (int rep = 0; rep < 10; ++rep) {
                std::vector<double> w(n);
                double s = 0.0;
                for (double& x : w) s += (x = g(rng) + 1e-3);
                for (double& x : w) x *= static_cast<double>(n) / s;
                const double e = eps(rng);
                ++cases;
                if (breakdown_exact(w, e).k_star != oracle::brute_force_breakdown(w, e)) ++mismatches;
            }
        }
        double worst = 0.0;
        for (int rep = 0; rep < 30; ++rep) {
            std::vector<Point> pts;
            std::vector<std::vector<Point>> clusters;
            for (int i = 0; i < 3; ++i) {
                Point p(2);
                p << z(rng), z(rng);
                pts.push_back(p);
                clusters.push_back({p});
            }
            const std::vector<double> w{u(rng), u(rng), u(rng)};
            const auto sample = ClusteredSample::from_points(clusters);
            const Point th = solve(sample, WeightScheme::per_cluster(w), EstimatorFamily::spatial_median()).theta_hat;
            worst = std::max(worst, (th - oracle::grid_spatial_median(pts, w)).norm());
        }
        std::ostringstream os;
        os << cases << " breakdown cases, " << mismatches << " mismatches; worst median distance " << worst;
        return Outcome{mismatches == 0 && worst <= 1e-2, os.str()};
    });

    criterion(9, "Huber efficiencies for Cauchy and Student-3 (C2-C4) within 15%", 300.0, [] {
        ReproduceOptions o;
        o.configs = {"C2", "C3", "C4"};
        o.estimators = {"huber"};
        const auto c = check_column(reproduce_table(TableKind::EfficiencyCauchy, o), "efficiency");
        const auto s = check_column(reproduce_table(TableKind::EfficiencyStudent3, o), "efficiency");
        return Outcome{c.pass && s.pass, "cauchy: " + c.detail + "; student3: " + s.detail};
    });

    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
