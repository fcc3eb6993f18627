#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "wmest/simulation.hpp"
#include "wmest/solver.hpp"

#include <random>

using namespace wmest;

namespace {

Point pt(double x, double y) {
    Point p(2);
    p << x, y;
    return p;
}

ClusteredSample singletons(const std::vector<Point>& pts) {
    std::vector<std::vector<Point>> c;
    for (const auto& p : pts) c.push_back({p});
    return ClusteredSample::from_points(c);
}

std::vector<EstimatorFamily> all_families() {
    return {EstimatorFamily::mean(), EstimatorFamily::spatial_median(), EstimatorFamily::huber(),
            EstimatorFamily::lp_median(3.0), EstimatorFamily::lp_median(5.0)};
}

}  // namespace

TEST_CASE("two-point mean is the midpoint") {
    const auto s = singletons({pt(1, 0), pt(2, 0)});
    const auto r = solve(s, WeightScheme::uniform(s), EstimatorFamily::mean());
    CHECK(r.converged);
    CHECK(r.theta_hat(0) == doctest::Approx(1.5));
    CHECK(r.theta_hat(1) == doctest::Approx(0.0));
}

TEST_CASE("weighted mean follows the weights") {
    const auto s = singletons({pt(0, 0), pt(3, 0)});
    const auto r = solve(s, WeightScheme::per_cluster({2.0, 1.0}), EstimatorFamily::mean());
    CHECK(r.theta_hat(0) == doctest::Approx(1.0));
}

TEST_CASE("spatial median matches a grid search on 3-point instances") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z(0.0, 3.0);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<Point> pts{pt(z(rng), z(rng)), pt(z(rng), z(rng)), pt(z(rng), z(rng))};
        std::vector<double> w{u(rng), u(rng), u(rng)};
        const auto s = singletons(pts);
        const auto r = solve(s, WeightScheme::per_cluster(w), EstimatorFamily::spatial_median());
        const Point g = oracle::grid_spatial_median(pts, w);
        CHECK(r.converged);
        CHECK((r.theta_hat - g).norm() < 1e-2);
    }
}

TEST_CASE("dominant weight pulls the spatial median onto a data point") {
    const auto s = singletons({pt(0, 0), pt(1, 0), pt(0, 1)});
    const auto r = solve(s, WeightScheme::per_cluster({5.0, 1.0, 1.0}), EstimatorFamily::spatial_median());
    CHECK(r.converged);
    CHECK(r.theta_hat.norm() < 1e-8);
    CHECK(r.final_gradient_norm < 1e-10);
}

TEST_CASE("collinear spatial median is the one-dimensional median") {
    const auto s = singletons({pt(0, 0), pt(1, 0), pt(5, 0), pt(9, 0), pt(10, 0)});
    const auto r = solve(s, WeightScheme::uniform(s), EstimatorFamily::spatial_median());
    CHECK(r.converged);
    CHECK((r.theta_hat - pt(5, 0)).norm() < 1e-8);
}

TEST_CASE("identical points are their own estimate") {
    const auto s = singletons({pt(2, 3), pt(2, 3), pt(2, 3)});
    for (const auto& fam : all_families()) {
        const auto r = solve(s, WeightScheme::uniform(s), fam);
        CHECK(r.converged);
        CHECK((r.theta_hat - pt(2, 3)).norm() < 1e-12);
    }
}

TEST_CASE("solutions are stationary for every family") {
    const auto s = generate_sample(ClusterConfiguration::named("C4"), DistributionSpec::student(3.0, 0.5), 99);
    std::vector<double> w(s.cluster_count());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 + 0.1 * static_cast<double>(i);
    const auto scheme = WeightScheme::per_cluster(w).normalized(s);
    for (const auto& fam : all_families()) {
        CAPTURE(fam.name());
        const auto r = solve(s, scheme, fam);
        CHECK(r.converged);
        CHECK(r.final_gradient_norm < 1e-8);
        // No nearby point does better.
        for (double dx : {-1e-4, 1e-4}) {
            for (double dy : {-1e-4, 1e-4}) {
                CHECK(objective(s, scheme, fam, r.theta_hat + pt(dx, dy)) >= r.objective_value - 1e-12);
            }
        }
    }
}

TEST_CASE("estimates are translation equivariant and permutation invariant") {
    const auto s = generate_sample(ClusterConfiguration::named("C2"), DistributionSpec::gaussian(0.3), 5);
    const auto w = WeightScheme::per_cluster({3, 3, 3, 3, 3, 0.5, 0.5, 0.5, 0.5, 0.5}).normalized(s);
    const Point shift = pt(10.0, -4.0);

    // Reverse the observation order within each cluster.
    std::vector<Matrix> permuted;
    for (const auto& c : s.clusters()) permuted.push_back(c.rowwise().reverse());
    const ClusteredSample sp(permuted);

    for (const auto& fam : all_families()) {
        CAPTURE(fam.name());
        const auto base = solve(s, w, fam);
        const auto moved = solve(s.translated(shift), w, fam);
        CHECK((moved.theta_hat - base.theta_hat - shift).norm() < 1e-7);
        const auto perm = solve(sp, w, fam);
        CHECK((perm.theta_hat - base.theta_hat).norm() < 1e-7);
    }
}

TEST_CASE("coordinatewise weighted median") {
    const auto s = singletons({pt(0, 5), pt(1, 4), pt(9, 3)});
    const Point m = coordinatewise_weighted_median(s, WeightScheme::uniform(s));
    CHECK(m.isApprox(pt(1, 4)));
    const Point m2 = coordinatewise_weighted_median(s, WeightScheme::per_cluster({1, 1, 5}));
    CHECK(m2.isApprox(pt(9, 3)));
}

TEST_CASE("iteration cap is reported as non-convergence, not thrown") {
    const auto s = generate_sample(ClusterConfiguration::named("C1"), DistributionSpec::gaussian(0.2), 1);
    SolveOptions o;
    o.max_iterations = 1;
    o.gradient_tolerance = 1e-300;
    o.step_tolerance = 0.0;
    const auto r = solve(s, WeightScheme::uniform(s), EstimatorFamily::spatial_median(), o);
    CHECK_FALSE(r.converged);
}
