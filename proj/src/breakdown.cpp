#include "wmest/breakdown.hpp"

#include "wmest/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace wmest {

namespace {

std::vector<double> validated_sorted(std::span<const double> weights) {
    if (weights.empty()) throw InputError("breakdown needs at least one weight");
    for (double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w)) throw InputError("breakdown weights must be finite and positive");
    }
    const double n = static_cast<double>(weights.size());
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(sum - n) > 1e-9 * std::max(1.0, n)) {
        std::ostringstream os;
        os.precision(17);
        os << "breakdown weights must sum to N = " << weights.size() << ", got " << sum;
        throw InputError(os.str());
    }
    std::vector<double> sorted(weights.begin(), weights.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    return sorted;
}

void check_eps(double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) throw InputError("breakdown fraction must lie in (0, 1]");
}

/// Minimal k with (sum of the k largest) >= threshold, on descending weights.
std::size_t min_count(const std::vector<double>& desc, double threshold) {
    double prefix = 0.0;
    for (std::size_t k = 1; k <= desc.size(); ++k) {
        prefix += desc[k - 1];
        if (prefix >= threshold - kBreakdownTieTolerance) return k;
    }
    return desc.size();
}

}  // namespace

BreakdownReport breakdown_exact(std::span<const double> weights, double eps_star, std::optional<double> eps_lower) {
    check_eps(eps_star);
    const std::vector<double> desc = validated_sorted(weights);
    const double n = static_cast<double>(desc.size());

    BreakdownReport rep;
    rep.total = desc.size();
    rep.threshold_used = eps_star * n;
    rep.k_star = min_count(desc, rep.threshold_used);
    rep.prefix_sum_at_k = std::accumulate(desc.begin(), desc.begin() + static_cast<std::ptrdiff_t>(rep.k_star), 0.0);
    rep.prefix_sum_before = rep.prefix_sum_at_k - desc[rep.k_star - 1];
    rep.epsilon_star = Fraction{static_cast<std::int64_t>(rep.k_star), static_cast<std::int64_t>(rep.total)};
    if (eps_lower) {
        std::tie(rep.k1_star, rep.k0_star) = breakdown_bracket(weights, *eps_lower, eps_star);
    } else {
        rep.k1_star = rep.k0_star = rep.k_star;
    }
    return rep;
}

std::pair<std::size_t, std::size_t> breakdown_bracket(std::span<const double> weights, double eps_lower,
                                                      double eps_upper) {
    check_eps(eps_lower);
    check_eps(eps_upper);
    if (eps_lower > eps_upper) throw InputError("breakdown bracket bounds are reversed");
    const std::vector<double> desc = validated_sorted(weights);
    const double n = static_cast<double>(desc.size());
    return {min_count(desc, eps_lower * n), min_count(desc, eps_upper * n)};
}

Fraction spatial_median_eps(std::int64_t n) {
    if (n < 1) throw InputError("sample size must be at least 1");
    return Fraction{(n - 1) / 2, n};
}

std::vector<double> expand_cluster_weights(std::span<const std::size_t> sizes, std::span<const double> weights) {
    if (sizes.size() != weights.size()) throw InputError("weights and sizes differ in length");
    std::vector<double> out;
    for (std::size_t i = 0; i < sizes.size(); ++i) out.insert(out.end(), sizes[i], weights[i]);
    return out;
}

}  // namespace wmest
