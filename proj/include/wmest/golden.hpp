#pragma once

#include "wmest/model.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wmest::golden {

/// $WMEST_DATA_DIR/golden when the variable is set, else the directory baked in at build time.
std::filesystem::path default_dir();

/// Estimator keys used by the data files: "mean", "median"/"spatial-median",
/// "huber", "lp3", "lp4", ...
EstimatorFamily family_for(std::string_view key);

struct WeightsEntry {
    std::string estimator;
    std::string config;
    double rho = 0.0;
    std::vector<std::size_t> sizes;
    /// As printed; not renormalized.
    std::vector<double> weights;
};

struct EfficiencyEntry {
    std::string config;
    double rho = 0.0;
    std::string estimator;
    double ratio_weighted = 0.0;
    double ratio_unweighted = 0.0;
    double efficiency = 0.0;
};

struct BreakdownEntry {
    std::string estimator;
    std::string config;
    double rho = 0.0;
    double prefix_sum = 0.0;
    double epsilon_percent = 0.0;
};

std::vector<WeightsEntry> load_weights(const std::filesystem::path& dir);
/// distribution is a DistributionSpec label: "gaussian", "cauchy", "student3".
std::vector<EfficiencyEntry> load_efficiency(const std::filesystem::path& dir, const std::string& distribution);
std::vector<BreakdownEntry> load_breakdown(const std::filesystem::path& dir);

const WeightsEntry& find_weights(const std::vector<WeightsEntry>& entries, std::string_view estimator,
                                 std::string_view config, double rho);

}  // namespace wmest::golden
