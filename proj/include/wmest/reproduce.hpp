#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wmest {

enum class TableKind { Weights, EfficiencyGaussian, EfficiencyCauchy, EfficiencyStudent3, Breakdown };

/// "weights", "efficiency-gaussian", "efficiency-cauchy", "efficiency-student3", "breakdown".
TableKind parse_table_kind(std::string_view name);
std::string table_kind_name(TableKind kind);

struct ReproduceOptions {
    std::uint64_t seed = 20150101;
    std::size_t replications = 500;
    unsigned threads = 1;
    /// Directory holding the stored table values; empty means golden::default_dir().
    std::filesystem::path data_dir;
    /// Restrict to these configurations / estimator keys; empty keeps all.
    std::vector<std::string> configs;
    std::vector<std::string> estimators;
    double efficiency_tolerance = 0.15;   ///< relative
    double weights_tolerance = 0.10;      ///< relative, on size-group mean weights
    double breakdown_tolerance = 1.0;     ///< percentage points
};

struct TableCell {
    std::string column;
    double value = 0.0;
    std::optional<double> reference;
    /// Absent for informational cells.
    std::optional<double> tolerance;
    bool relative = true;

    std::optional<bool> pass() const;
};

struct TableRow {
    std::string config;
    double rho = 0.0;
    std::string estimator;
    /// Sub-row label (cluster index for the weights table), empty otherwise.
    std::string item;
    std::vector<TableCell> cells;

    const TableCell& cell(std::string_view column) const;
};

struct ReproducedTable {
    TableKind kind = TableKind::Breakdown;
    std::vector<TableRow> rows;

    bool all_pass() const;
    std::size_t failures() const;
    const TableRow& find(std::string_view config, double rho, std::string_view estimator,
                         std::string_view item = {}) const;
};

ReproducedTable reproduce_table(TableKind kind, const ReproduceOptions& opts = {});

/// config, rho, estimator, item, then per cell: <col>, <col>_reference, <col>_diff, <col>_status.
void write_table_csv(const std::filesystem::path& path, const ReproducedTable& table);

}  // namespace wmest
