#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "wmest/asymptotics.hpp"
#include "wmest/errors.hpp"
#include "wmest/simulation.hpp"
#include "wmest/solver.hpp"

using namespace wmest;

namespace {

Point pt(double x, double y) {
    Point p(2);
    p << x, y;
    return p;
}

std::vector<EstimatorFamily> families() {
    return {EstimatorFamily::mean(), EstimatorFamily::spatial_median(), EstimatorFamily::huber(),
            EstimatorFamily::lp_median(3.0)};
}

}  // namespace

TEST_CASE("B_hat + C_hat equals the cluster-sum outer product") {
    const auto s = generate_sample(ClusterConfiguration::named("C3"), DistributionSpec::gaussian(0.5), 3);
    const std::vector<double> w{2.0, 1.5, 1.2, 0.9, 0.9, 0.8, 0.9, 1.0, 0.85, 0.95};
    const auto scheme = WeightScheme::per_cluster(w);
    const Point a = pt(0.1, -0.2);
    for (const auto& fam : families()) {
        CAPTURE(fam.name());
        const Matrix meat = b_hat(s, scheme, fam, a) + c_hat(s, scheme, fam, a);
        CHECK((meat - oracle::cluster_sum_meat(s, w, fam, a)).norm() < 1e-10 * (1.0 + meat.norm()));
    }
}

TEST_CASE("cross term is symmetric and vanishes for singleton clusters") {
    const auto s = ClusteredSample::from_points({{pt(1, 2)}, {pt(-1, 0)}, {pt(3, 3)}});
    const auto w = WeightScheme::uniform(s);
    CHECK(c_hat(s, w, EstimatorFamily::mean(), pt(0, 0)).norm() == 0.0);
    const auto s2 = generate_sample(ClusterConfiguration::named("C4"), DistributionSpec::gaussian(0.4), 8);
    const Matrix c = c_hat(s2, WeightScheme::uniform(s2), EstimatorFamily::huber(), pt(0, 0));
    CHECK((c - c.transpose()).norm() == 0.0);
}

TEST_CASE("mean bread is the average weight times identity") {
    const auto s = generate_sample(ClusterConfiguration::named("C2"), DistributionSpec::gaussian(0.2), 4);
    const auto w = WeightScheme::per_cluster({2, 2, 2, 2, 2, 0.5, 0.5, 0.5, 0.5, 0.5});
    const Matrix v = v_hat(s, w, EstimatorFamily::mean(), pt(0, 0));
    CHECK(v.isApprox(w.mean_weight(s) * Matrix::Identity(2, 2)));
}

TEST_CASE("sandwich pieces are consistent with finite differences of the estimating function") {
    const auto s = generate_sample(ClusterConfiguration::named("C4"), DistributionSpec::gaussian(0.3), 12);
    const auto w = WeightScheme::uniform(s);
    const Point a = pt(0.05, 0.02);
    for (const auto& fam : {EstimatorFamily::mean(), EstimatorFamily::lp_median(4.0)}) {
        const Matrix v = v_hat(s, w, fam, a);
        const Matrix fd = oracle::fd_jacobian([&](const Point& b) { return estimating_function(s, w, fam, b); }, a, 1e-6);
        CHECK((v - fd).norm() < 1e-5 * v.norm());
    }
}

TEST_CASE("sandwich is invariant to rescaling the weights") {
    const auto s = generate_sample(ClusterConfiguration::named("C1"), DistributionSpec::gaussian(0.6), 21);
    const std::vector<double> w{1, 1.2, 0.8, 1, 1, 1.1, 0.9, 1, 1, 0.3};
    const auto fam = EstimatorFamily::huber();
    const Matrix s1 = sigma_hat(s, WeightScheme::per_cluster(w), fam, pt(0, 0)).Sigma_hat;
    const Matrix s2 = sigma_hat(s, WeightScheme::per_cluster(w).scaled(7.5), fam, pt(0, 0)).Sigma_hat;
    CHECK((s1 - s2).norm() < 1e-10 * s1.norm());
}

TEST_CASE("cluster moments reproduce the direct estimators") {
    const auto s = generate_sample(ClusterConfiguration::named("C3"), DistributionSpec::cauchy(0.2), 30);
    const std::vector<double> w{1.7, 1.7, 1.2, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9};
    for (const auto& fam : families()) {
        if (fam == EstimatorFamily::mean()) continue;
        CAPTURE(fam.name());
        const Point a = solve(s, WeightScheme::per_cluster(w), fam).theta_hat;
        const auto m = ClusterMoments::compute(s, fam, a);
        const auto direct = sigma_hat(s, WeightScheme::per_cluster(w), fam, a);
        const auto via = m.sandwich(w, a, fam.name());
        CHECK((direct.Sigma_hat - via.Sigma_hat).norm() < 1e-10 * direct.Sigma_hat.norm());
        CHECK(m.sandwich_det(w) == doctest::Approx(direct.Sigma_hat.determinant()).epsilon(1e-9));
    }
}

TEST_CASE("singular bread is a numerical error naming the family") {
    const auto s = ClusteredSample::from_points({{pt(1, 1), pt(1, 1)}, {pt(1, 1)}});
    const auto fam = EstimatorFamily::spatial_median();
    try {
        (void)sigma_hat(s, WeightScheme::uniform(s), fam, pt(1, 1));
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("spatial") != std::string::npos);
    }
    CHECK(std::isinf(ClusterMoments::compute(s, fam, pt(1, 1)).sandwich_det(std::vector<double>{1.0, 1.0})));
}

TEST_CASE("relative efficiency") {
    const Matrix a = 2.0 * Matrix::Identity(2, 2);
    CHECK(relative_efficiency(a, a) == 1.0);
    CHECK(relative_efficiency(4.0 * a, a) == doctest::Approx(4.0));
}

TEST_CASE("assumption diagnostics") {
    const auto s = ClusteredSample::from_points({{pt(0, 0), pt(1, 0)}, {pt(2, 0)}});
    const auto w = WeightScheme::per_cluster({0.5, 2.0});
    const auto d = assumption_diagnostics(w, s, 1.0);
    CHECK(d.weight_mean == doctest::Approx(1.0));
    CHECK(d.c_w_finite == doctest::Approx((0.25 * 2 + 4.0) / 3.0));
    CHECK(d.kolmogorov_partial == doctest::Approx(1.0 + 4.0 / 4.0));
    CHECK(d.lindeberg_sum == doctest::Approx((1.0 + 8.0) / 3.0));
}

TEST_CASE("plug-in covariance of the weighted mean is consistent for the population value") {
    // Equicorrelated Gaussian clusters: Sigma^w = (1/N) sum_i w_i^2 m_i (1 + (m_i - 1) rho) I.
    const double rho = 0.4;
    std::vector<std::size_t> sizes;
    for (int i = 0; i < 1000; ++i) sizes.push_back(static_cast<std::size_t>(5 + 10 * (i % 2)));
    const auto cfg = ClusterConfiguration::custom(sizes);
    const auto s = generate_sample(cfg, DistributionSpec::gaussian(rho), 2024);
    std::vector<double> w(sizes.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / (1.0 + (static_cast<double>(sizes[i]) - 1.0) * rho);
    w = normalize_cluster_weights(sizes, w);
    double truth = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double m = static_cast<double>(sizes[i]);
        truth += w[i] * w[i] * m * (1.0 + (m - 1.0) * rho);
    }
    truth /= static_cast<double>(cfg.total());
    const auto scheme = WeightScheme::per_cluster(w);
    const Point th = solve(s, scheme, EstimatorFamily::mean()).theta_hat;
    const Matrix sig = sigma_hat(s, scheme, EstimatorFamily::mean(), th).Sigma_hat;
    CHECK(sig(0, 0) == doctest::Approx(truth).epsilon(0.15));
    CHECK(sig(1, 1) == doctest::Approx(truth).epsilon(0.15));
    CHECK(std::abs(sig(0, 1)) < 0.15 * truth);
}
