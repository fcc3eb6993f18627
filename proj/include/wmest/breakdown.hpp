#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace wmest {

struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;
    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
    friend bool operator==(const Fraction&, const Fraction&) = default;
};

/// Prefix sums within this distance of the threshold count as reaching it.
inline constexpr double kBreakdownTieTolerance = 1e-9;

struct BreakdownReport {
    std::size_t k_star = 0;
    std::size_t total = 0;  ///< N_n
    Fraction epsilon_star;  ///< k_star / N_n
    std::size_t k1_star = 0;
    std::size_t k0_star = 0;
    double threshold_used = 0.0;   ///< eps_star * N_n
    double prefix_sum_at_k = 0.0;  ///< sum of the k_star largest weights
    double prefix_sum_before = 0.0;  ///< sum of the k_star - 1 largest weights
};

/// Smallest number of observations whose weights reach eps_star * N_n.
/// Weights are per observation and must sum to N_n. When eps_lower is given
/// the report also carries the bracket [k1_star, k0_star] for
/// (eps_lower, eps_star); otherwise the bracket is [k_star, k_star].
BreakdownReport breakdown_exact(std::span<const double> weights, double eps_star,
                                std::optional<double> eps_lower = std::nullopt);

/// [k1_star, k0_star] from thresholds eps_lower * N_n and eps_upper * N_n.
std::pair<std::size_t, std::size_t> breakdown_bracket(std::span<const double> weights, double eps_lower,
                                                      double eps_upper);

/// floor((N - 1) / 2) / N, the finite-sample breakdown point of the unweighted spatial median.
Fraction spatial_median_eps(std::int64_t n);

/// Repeats each cluster weight m_i times.
std::vector<double> expand_cluster_weights(std::span<const std::size_t> sizes, std::span<const double> weights);

}  // namespace wmest
