#include "wmest/reproduce.hpp"

#include "wmest/breakdown.hpp"
#include "wmest/errors.hpp"
#include "wmest/golden.hpp"
#include "wmest/io.hpp"
#include "wmest/simulation.hpp"
#include "wmest/weight_design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace wmest {

namespace {

bool selected(const std::vector<std::string>& filter, const std::string& key) {
    return filter.empty() || std::find(filter.begin(), filter.end(), key) != filter.end();
}

/// Seed of one (configuration, rho) design so that all tables share common random numbers.
std::uint64_t design_seed(std::uint64_t master, const std::string& config, double rho) {
    std::uint64_t k = 0;
    for (char c : config) k = k * 131 + static_cast<unsigned char>(c);
    return replication_seed(master, k * 1000 + static_cast<std::uint64_t>(std::llround(rho * 100.0)));
}

std::filesystem::path data_dir(const ReproduceOptions& opts) {
    return opts.data_dir.empty() ? golden::default_dir() : opts.data_dir;
}

TableCell info(std::string column, double value, std::optional<double> reference = std::nullopt) {
    return TableCell{std::move(column), value, reference, std::nullopt, true};
}

TableCell checked(std::string column, double value, double reference, double tolerance, bool relative) {
    return TableCell{std::move(column), value, reference, tolerance, relative};
}

ReproducedTable weights_table(const ReproduceOptions& opts) {
    ReproducedTable table{TableKind::Weights, {}};
    for (const auto& entry : golden::load_weights(data_dir(opts))) {
        if (!selected(opts.configs, entry.config) || !selected(opts.estimators, entry.estimator)) continue;
        const ClusterConfiguration cfg = ClusterConfiguration::named(entry.config);
        if (cfg.sizes != entry.sizes) throw InputError("stored weights for " + entry.config + " have other cluster sizes");
        const EstimatorFamily fam = golden::family_for(entry.estimator);
        const ClusterMoments moments =
            averaged_moments(cfg, DistributionSpec::gaussian(entry.rho), fam, opts.replications,
                             design_seed(opts.seed, entry.config, entry.rho), opts.threads);
        const std::vector<double> ours = optimize_weights(moments).weights;
        const std::vector<double> theirs = normalize_cluster_weights(entry.sizes, entry.weights);
        const auto ours_groups = group_mean_weights(entry.sizes, ours);
        const auto their_groups = group_mean_weights(entry.sizes, theirs);
        auto group_of = [](const auto& groups, std::size_t m) {
            for (const auto& [size, w] : groups) {
                if (size == m) return w;
            }
            return 0.0;
        };
        for (std::size_t i = 0; i < ours.size(); ++i) {
            const std::size_t m = entry.sizes[i];
            TableRow row{entry.config, entry.rho, entry.estimator, std::to_string(i + 1), {}};
            row.cells.push_back(info("m_i", static_cast<double>(m), static_cast<double>(m)));
            row.cells.push_back(info("weight", ours[i], theirs[i]));
            row.cells.push_back(checked("group_mean_weight", group_of(ours_groups, m), group_of(their_groups, m),
                                        opts.weights_tolerance, true));
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

ReproducedTable efficiency_table(TableKind kind, const DistributionSpec& proto, const ReproduceOptions& opts) {
    ReproducedTable table{kind, {}};
    const auto entries = golden::load_efficiency(data_dir(opts), proto.label());

    std::vector<std::pair<std::string, double>> designs;
    for (const auto& e : entries) {
        if (!selected(opts.configs, e.config) || !selected(opts.estimators, e.estimator)) continue;
        const std::pair<std::string, double> key{e.config, e.rho};
        if (std::find(designs.begin(), designs.end(), key) == designs.end()) designs.push_back(key);
    }

    for (const auto& [config, rho] : designs) {
        ExperimentConfig ec;
        ec.configuration = ClusterConfiguration::named(config);
        ec.distribution = proto;
        ec.distribution.rho = rho;
        ec.replications = opts.replications;
        ec.seed = design_seed(opts.seed, config, rho);
        ec.threads = opts.threads;
        ec.weights_source = WeightsSource::Optimal;
        ec.eval_point = EvalPoint::TrueTheta;
        std::vector<const golden::EfficiencyEntry*> rows;
        for (const auto& e : entries) {
            if (e.config != config || e.rho != rho || !selected(opts.estimators, e.estimator)) continue;
            ec.estimators.push_back(golden::family_for(e.estimator));
            rows.push_back(&e);
        }
        const ExperimentReport report = run_experiment(ec);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const auto& e = *rows[k];
            const EstimatorReport& r = report.estimators[k];
            TableRow row{config, rho, e.estimator, {}, {}};
            const double tol = opts.efficiency_tolerance;
            row.cells.push_back(checked("ratio_weighted", r.ratio_weighted_vs_reference, e.ratio_weighted, tol, true));
            row.cells.push_back(
                checked("ratio_unweighted", r.ratio_unweighted_vs_reference, e.ratio_unweighted, tol, true));
            row.cells.push_back(checked("efficiency", r.efficiency, e.efficiency, tol, true));
            row.cells.push_back(info("efficiency_stderr", r.efficiency_stderr));
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

ReproducedTable breakdown_table(const ReproduceOptions& opts) {
    ReproducedTable table{TableKind::Breakdown, {}};
    const auto dir = data_dir(opts);
    const auto weights = golden::load_weights(dir);
    for (const auto& e : golden::load_breakdown(dir)) {
        if (!selected(opts.configs, e.config) || !selected(opts.estimators, e.estimator)) continue;
        const auto& w = golden::find_weights(weights, e.estimator, e.config, e.rho);
        const auto per_obs = expand_cluster_weights(w.sizes, normalize_cluster_weights(w.sizes, w.weights));
        const BreakdownReport rep = breakdown_exact(per_obs, 0.5);
        TableRow row{e.config, e.rho, e.estimator, {}, {}};
        row.cells.push_back(info("k_star", static_cast<double>(rep.k_star)));
        row.cells.push_back(info("prefix_sum", rep.prefix_sum_at_k, e.prefix_sum));
        row.cells.push_back(checked("epsilon_percent", 100.0 * rep.epsilon_star.value(), e.epsilon_percent,
                                    opts.breakdown_tolerance, false));
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace

TableKind parse_table_kind(std::string_view name) {
    if (name == "weights") return TableKind::Weights;
    if (name == "efficiency-gaussian") return TableKind::EfficiencyGaussian;
    if (name == "efficiency-cauchy") return TableKind::EfficiencyCauchy;
    if (name == "efficiency-student3") return TableKind::EfficiencyStudent3;
    if (name == "breakdown") return TableKind::Breakdown;
    throw InputError("unknown table '" + std::string(name) +
                     "' (expected weights, efficiency-gaussian, efficiency-cauchy, efficiency-student3 or breakdown)");
}

std::string table_kind_name(TableKind kind) {
    switch (kind) {
        case TableKind::Weights: return "weights";
        case TableKind::EfficiencyGaussian: return "efficiency-gaussian";
        case TableKind::EfficiencyCauchy: return "efficiency-cauchy";
        case TableKind::EfficiencyStudent3: return "efficiency-student3";
        case TableKind::Breakdown: return "breakdown";
    }
    return "unknown";
}

std::optional<bool> TableCell::pass() const {
    if (!tolerance || !reference) return std::nullopt;
    const double diff = std::abs(value - *reference);
    const double allowed = relative ? *tolerance * std::abs(*reference) : *tolerance;
    return std::isfinite(value) && diff <= allowed + 1e-12;
}

const TableCell& TableRow::cell(std::string_view column) const {
    for (const auto& c : cells) {
        if (c.column == column) return c;
    }
    throw InputError("row has no column '" + std::string(column) + "'");
}

bool ReproducedTable::all_pass() const { return failures() == 0; }

std::size_t ReproducedTable::failures() const {
    std::size_t n = 0;
    for (const auto& r : rows) {
        for (const auto& c : r.cells) {
            if (auto p = c.pass(); p && !*p) ++n;
        }
    }
    return n;
}

const TableRow& ReproducedTable::find(std::string_view config, double rho, std::string_view estimator,
                                      std::string_view item) const {
    for (const auto& r : rows) {
        if (r.config == config && std::abs(r.rho - rho) < 1e-12 && r.estimator == estimator && r.item == item) return r;
    }
    throw InputError("table has no row " + std::string(config) + " " + std::string(estimator));
}

ReproducedTable reproduce_table(TableKind kind, const ReproduceOptions& opts) {
    if (opts.replications < 1) throw InputError("replications must be >= 1");
    switch (kind) {
        case TableKind::Weights: return weights_table(opts);
        case TableKind::EfficiencyGaussian: return efficiency_table(kind, DistributionSpec::gaussian(0.2), opts);
        case TableKind::EfficiencyCauchy: return efficiency_table(kind, DistributionSpec::cauchy(0.2), opts);
        case TableKind::EfficiencyStudent3: return efficiency_table(kind, DistributionSpec::student(3.0, 0.2), opts);
        case TableKind::Breakdown: return breakdown_table(opts);
    }
    throw InputError("unknown table kind");
}

void write_table_csv(const std::filesystem::path& path, const ReproducedTable& table) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << "config,rho,estimator,item";
    if (!table.rows.empty()) {
        for (const auto& c : table.rows.front().cells) {
            out << ',' << c.column << ',' << c.column << "_reference," << c.column << "_diff," << c.column << "_status";
        }
    }
    out << '\n';
    for (const auto& r : table.rows) {
        out << r.config << ',' << io::format_double(r.rho) << ',' << r.estimator << ',' << r.item;
        for (const auto& c : r.cells) {
            out << ',' << io::format_double(c.value) << ',';
            if (c.reference) out << io::format_double(*c.reference) << ',' << io::format_double(c.value - *c.reference);
            else out << ',';
            const auto p = c.pass();
            out << ',' << (p ? (*p ? "PASS" : "FAIL") : "INFO");
        }
        out << '\n';
    }
    if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace wmest
