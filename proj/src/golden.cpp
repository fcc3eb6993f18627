#include "wmest/golden.hpp"

#include "wmest/errors.hpp"
#include "wmest/io.hpp"

#include <cmath>
#include <cstdlib>
#include <map>
#include <tuple>

namespace wmest::golden {

namespace {

std::string where(const std::filesystem::path& file, std::size_t line) {
    return file.string() + ":" + std::to_string(line);
}

void expect_columns(const io::CsvRecord& rec, std::size_t n, const std::filesystem::path& file) {
    if (rec.fields.size() != n) {
        throw InputError(where(file, rec.line) + ": expected " + std::to_string(n) + " columns, got " +
                         std::to_string(rec.fields.size()));
    }
}

}  // namespace

std::filesystem::path default_dir() {
    if (const char* env = std::getenv("WMEST_DATA_DIR"); env && *env) return std::filesystem::path(env) / "golden";
    return std::filesystem::path(WMEST_DEFAULT_DATA_DIR) / "golden";
}

EstimatorFamily family_for(std::string_view key) {
    if (key == "mean") return EstimatorFamily::mean();
    if (key == "median" || key == "spatial-median") return EstimatorFamily::spatial_median();
    if (key == "huber") return EstimatorFamily::huber();
    if (key.size() > 2 && key.substr(0, 2) == "lp") {
        return EstimatorFamily::lp_median(io::parse_double(key.substr(2), "estimator key '" + std::string(key) + "'"));
    }
    throw InputError("unknown estimator key '" + std::string(key) + "'");
}

std::vector<WeightsEntry> load_weights(const std::filesystem::path& dir) {
    const auto file = dir / "optimal_weights.csv";
    std::vector<WeightsEntry> out;
    std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
    for (const auto& rec : io::read_csv(file)) {
        expect_columns(rec, 6, file);
        const auto& f = rec.fields;
        const std::string at = where(file, rec.line);
        auto key = std::make_tuple(f[0], f[1], f[2]);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, out.size()).first;
            out.push_back({f[0], f[1], io::parse_double(f[2], at), {}, {}});
        }
        WeightsEntry& e = out[it->second];
        e.sizes.push_back(static_cast<std::size_t>(io::parse_int(f[4], at)));
        e.weights.push_back(io::parse_double(f[5], at));
    }
    return out;
}

std::vector<EfficiencyEntry> load_efficiency(const std::filesystem::path& dir, const std::string& distribution) {
    const auto file = dir / ("efficiency_" + distribution + ".csv");
    std::vector<EfficiencyEntry> out;
    for (const auto& rec : io::read_csv(file)) {
        expect_columns(rec, 6, file);
        const auto& f = rec.fields;
        const std::string at = where(file, rec.line);
        out.push_back({f[0], io::parse_double(f[1], at), f[2], io::parse_double(f[3], at), io::parse_double(f[4], at),
                       io::parse_double(f[5], at)});
    }
    return out;
}

std::vector<BreakdownEntry> load_breakdown(const std::filesystem::path& dir) {
    const auto file = dir / "breakdown.csv";
    std::vector<BreakdownEntry> out;
    for (const auto& rec : io::read_csv(file)) {
        expect_columns(rec, 5, file);
        const auto& f = rec.fields;
        const std::string at = where(file, rec.line);
        out.push_back({f[0], f[1], io::parse_double(f[2], at), io::parse_double(f[3], at), io::parse_double(f[4], at)});
    }
    return out;
}

const WeightsEntry& find_weights(const std::vector<WeightsEntry>& entries, std::string_view estimator,
                                 std::string_view config, double rho) {
    for (const auto& e : entries) {
        if (e.estimator == estimator && e.config == config && std::abs(e.rho - rho) < 1e-12) return e;
    }
    throw InputError("no stored weights for " + std::string(estimator) + " " + std::string(config));
}

}  // namespace wmest::golden
