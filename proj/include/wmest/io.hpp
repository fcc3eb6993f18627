#pragma once

#include "wmest/asymptotics.hpp"
#include "wmest/breakdown.hpp"
#include "wmest/model.hpp"
#include "wmest/simulation.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wmest::io {

/// Shortest representation that parses back to the same double; always uses '.'.
std::string format_double(double value);

/// One non-comment CSV line split on commas, with its 1-based line number.
struct CsvRecord {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

/// Reads a CSV file, dropping blank lines and lines starting with '#'. A first
/// record whose first field is not numeric is treated as a header and dropped.
std::vector<CsvRecord> read_csv(const std::filesystem::path& path, bool* had_header = nullptr);

double parse_double(std::string_view text, const std::string& where);
std::int64_t parse_int(std::string_view text, const std::string& where);

struct SampleFile {
    ClusteredSample sample;
    /// cluster_id of each cluster, in order of first appearance.
    std::vector<std::int64_t> cluster_ids;
};

/// Rows: cluster_id, x_1, ..., x_d.
SampleFile read_sample_csv(const std::filesystem::path& path);
void write_sample_csv(const std::filesystem::path& path, const ClusteredSample& sample,
                      const std::vector<std::int64_t>& cluster_ids);

struct WeightsFile {
    std::map<std::int64_t, double> weights;
    /// Present when the file carries the (cluster_id, m_i, w_i) layout.
    std::map<std::int64_t, std::size_t> sizes;
};

/// Rows: cluster_id, weight  or  cluster_id, m_i, w_i.
WeightsFile read_weights_csv(const std::filesystem::path& path);
/// Weights ordered like `cluster_ids`; every id must be present.
std::vector<double> weights_for(const WeightsFile& file, const std::vector<std::int64_t>& cluster_ids,
                                const std::string& source);
void write_weights_csv(const std::filesystem::path& path, const std::vector<std::int64_t>& cluster_ids,
                       const std::vector<std::size_t>& sizes, const std::vector<double>& weights);

void write_theta_csv(const std::filesystem::path& path, const Point& theta);
/// Blocks B_hat, C_hat, V_hat, Sigma_hat (one row per matrix row), then
/// eval_point and condition_V.
void write_covariance_csv(const std::filesystem::path& path, const CovarianceReport& report);

/// config, distribution, rho, estimator, metric, value, stderr
void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows);

struct BreakdownRow {
    std::string config;
    std::string rho;
    std::string estimator;
    BreakdownReport report;
};
/// config, rho, estimator, k_star, epsilon, prefix_sum (plus bracket and threshold columns).
void write_breakdown_csv(const std::filesystem::path& path, const std::vector<BreakdownRow>& rows);

/// Builds an ExperimentConfig from its JSON mirror; relative weights_file
/// paths resolve against base_dir.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);

EstimatorFamily family_from_json(const nlohmann::json& j);
nlohmann::json family_to_json(const EstimatorFamily& fam);

}  // namespace wmest::io
