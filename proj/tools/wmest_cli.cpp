#include "wmest/breakdown.hpp"
#include "wmest/errors.hpp"
#include "wmest/io.hpp"
#include "wmest/reproduce.hpp"
#include "wmest/simulation.hpp"
#include "wmest/solver.hpp"
#include "wmest/weight_design.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wmest;

namespace {

constexpr std::uint64_t kBuiltinSeed = 20150101;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("WMEST_SEED"); env && *env) {
        return static_cast<std::uint64_t>(io::parse_int(env, "WMEST_SEED"));
    }
    return kBuiltinSeed;
}

std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

/// File-name friendly estimator key: mean, spatial-median, huber, lp3, ...
std::string slug(const EstimatorFamily& fam) {
    switch (fam.kind()) {
        case FamilyKind::Mean: return "mean";
        case FamilyKind::SpatialMedian: return "spatial-median";
        case FamilyKind::Huber: return "huber";
        case FamilyKind::LpMedian: return "lp" + io::format_double(fam.parameter());
    }
    return "estimator";
}

struct Manifest {
    json j;

    Manifest(std::string command, std::string config_path) {
        j["command"] = std::move(command);
        j["config_path"] = std::move(config_path);
        j["tool_version"] = WMEST_VERSION;
        j["started"] = timestamp();
        j["outputs"] = json::array();
    }
    void output(const fs::path& p) { j["outputs"].push_back(p.string()); }
    void write(const fs::path& path) {
        j["finished"] = timestamp();
        std::ofstream out(path);
        if (!out) throw InputError("cannot write " + path.string());
        out << j.dump(2) << '\n';
    }
};

fs::path prepare_dir(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
    std::string sample;
    std::string weights;
    std::string family = "mean";
    double huber_k = EstimatorFamily::kDefaultHuberK;
    double lp_p = 3.0;
    double tol = 1e-10;
    std::size_t max_iter = 500;
    std::string out_dir = ".";
};

int cmd_estimate(const EstimateArgs& a) {
    const fs::path out = prepare_dir(a.out_dir);
    Manifest manifest("estimate", a.sample);
    const EstimatorFamily fam = EstimatorFamily::parse(a.family, a.huber_k, a.lp_p);
    const io::SampleFile sf = io::read_sample_csv(a.sample);
    const auto sizes = sf.sample.sizes();

    std::vector<double> w(sizes.size(), 1.0);
    if (a.weights.empty()) {
        manifest.j["weights"] = "w ≡ 1";
    } else {
        w = normalize_cluster_weights(sizes, io::weights_for(io::read_weights_csv(a.weights), sf.cluster_ids, a.weights));
        manifest.j["weights"] = a.weights;
    }
    const WeightScheme scheme = WeightScheme::per_cluster(w);
    manifest.j["family"] = fam.name();

    SolveOptions so;
    so.gradient_tolerance = a.tol;
    so.max_iterations = a.max_iter;
    const SolveResult res = solve(sf.sample, scheme, fam, so);
    manifest.j["converged"] = res.converged;
    manifest.j["iterations"] = res.iterations;
    manifest.j["final_gradient_norm"] = res.final_gradient_norm;

    const fs::path theta_path = out / "theta.csv";
    io::write_theta_csv(theta_path, res.theta_hat);
    manifest.output(theta_path);

    int code = 0;
    try {
        const CovarianceReport cov = sigma_hat(sf.sample, scheme, fam, res.theta_hat);
        const fs::path cov_path = out / "covariance.csv";
        io::write_covariance_csv(cov_path, cov);
        manifest.output(cov_path);
        manifest.j["nonsmooth_count"] = cov.nonsmooth_count;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        manifest.j["error"] = e.what();
        code = 2;
    }
    if (!res.converged) {
        std::cerr << "error: " << fam.name() << " did not converge after " << res.iterations
                  << " iterations (gradient norm " << res.final_gradient_norm << ")\n";
        code = 2;
    }
    manifest.write(out / "manifest.json");
    return code;
}

// ---------------------------------------------------------------------------

ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_flag) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(path + ": " + e.what());
    }
    ExperimentConfig cfg = io::experiment_config_from_json(j, fs::path(path).parent_path());
    if (seed_flag) cfg.seed = *seed_flag;
    else if (!j.contains("seed")) cfg.seed = default_seed();
    return cfg;
}

int cmd_optimize_weights(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out_dir) {
    const fs::path out = prepare_dir(out_dir);
    const ExperimentConfig cfg = load_config(config, seed);
    Manifest manifest("optimize-weights", config);
    manifest.j["seed"] = cfg.seed;
    std::vector<std::int64_t> ids(cfg.configuration.sizes.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i + 1);

    int code = 0;
    for (const auto& fam : cfg.estimators) {
        const WeightOptimizationResult res = design_weights(cfg, fam);
        const std::string suffix = cfg.estimators.size() == 1 ? "" : "_" + slug(fam);
        const fs::path wpath = out / ("weights" + suffix + ".csv");
        const fs::path tpath = out / ("trace" + suffix + ".csv");
        io::write_weights_csv(wpath, ids, cfg.configuration.sizes, res.weights);
        std::ofstream t(tpath);
        t << "sweep,det_sigma\n";
        for (std::size_t k = 0; k < res.trace.size(); ++k) t << k + 1 << ',' << io::format_double(res.trace[k]) << '\n';
        if (!t) throw InputError("failed writing " + tpath.string());
        manifest.output(wpath);
        manifest.output(tpath);
        manifest.j["estimators"].push_back({{"family", fam.name()},
                                            {"objective", res.objective},
                                            {"unweighted_objective", res.unweighted_objective},
                                            {"sweeps", res.iterations},
                                            {"converged", res.converged}});
        if (!res.converged) {
            std::cerr << "error: weight optimization for " << fam.name() << " did not converge\n";
            code = 2;
        }
    }
    manifest.write(out / "manifest.json");
    return code;
}

// ---------------------------------------------------------------------------

struct BreakdownArgs {
    std::string weights;
    std::string sample;
    std::optional<double> eps_star;
    std::optional<double> eps_lower;
    bool spatial_median_exact = false;
    bool normalize = false;
    std::string label = "custom";
    std::string rho;
    std::string estimator;
    std::string out_dir = ".";
};

int cmd_breakdown(const BreakdownArgs& a) {
    const fs::path out = prepare_dir(a.out_dir);
    Manifest manifest("breakdown", a.weights);
    const io::WeightsFile wf = io::read_weights_csv(a.weights);

    std::vector<std::int64_t> ids;
    std::vector<std::size_t> sizes;
    if (!a.sample.empty()) {
        const io::SampleFile sf = io::read_sample_csv(a.sample);
        ids = sf.cluster_ids;
        sizes = sf.sample.sizes();
    } else {
        for (const auto& [id, w] : wf.weights) {
            ids.push_back(id);
            const auto it = wf.sizes.find(id);
            sizes.push_back(it == wf.sizes.end() ? 1 : it->second);
        }
    }
    std::vector<double> w = io::weights_for(wf, ids, a.weights);
    if (a.normalize) w = normalize_cluster_weights(sizes, w);
    const std::vector<double> per_obs = expand_cluster_weights(sizes, w);

    double eps = a.eps_star.value_or(0.5);
    if (a.spatial_median_exact) {
        const Fraction f = spatial_median_eps(static_cast<std::int64_t>(per_obs.size()));
        std::cout << "spatial median breakdown point: " << f.num << "/" << f.den << '\n';
        manifest.j["spatial_median_eps"] = {{"num", f.num}, {"den", f.den}};
        eps = f.value();
    }
    const BreakdownReport rep = breakdown_exact(per_obs, eps, a.eps_lower);
    const fs::path path = out / "breakdown.csv";
    io::write_breakdown_csv(path, {{a.label, a.rho, a.estimator, rep}});
    manifest.output(path);
    manifest.j["eps_star"] = eps;
    manifest.write(out / "manifest.json");
    std::cout << "k* = " << rep.k_star << ", epsilon* = " << rep.epsilon_star.num << "/" << rep.epsilon_star.den << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct ReproduceArgs {
    std::string table;
    std::optional<std::uint64_t> seed;
    std::size_t replications = 500;
    unsigned threads = 1;
    std::string data_dir;
    std::vector<std::string> configs;
    std::vector<std::string> estimators;
    std::string out_dir = ".";
};

int cmd_reproduce(const ReproduceArgs& a) {
    const TableKind kind = parse_table_kind(a.table);
    const fs::path out = prepare_dir(a.out_dir);
    Manifest manifest("reproduce", a.data_dir);
    ReproduceOptions opts;
    opts.seed = a.seed.value_or(default_seed());
    opts.replications = a.replications;
    opts.threads = a.threads;
    opts.data_dir = a.data_dir;
    opts.configs = a.configs;
    opts.estimators = a.estimators;
    const ReproducedTable table = reproduce_table(kind, opts);
    const fs::path path = out / (a.table + ".csv");
    write_table_csv(path, table);
    manifest.output(path);
    manifest.j["table"] = a.table;
    manifest.j["seed"] = opts.seed;
    manifest.j["replications"] = opts.replications;
    manifest.j["failed_cells"] = table.failures();
    manifest.write(out / (a.table + ".manifest.json"));
    std::cout << a.table << ": " << table.rows.size() << " rows, " << table.failures() << " cells outside tolerance\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_experiment(const std::string& config, std::optional<std::uint64_t> seed, std::optional<unsigned> threads,
                   const std::string& out_dir) {
    const fs::path out = prepare_dir(out_dir);
    ExperimentConfig cfg = load_config(config, seed);
    if (threads) cfg.threads = *threads;
    Manifest manifest("experiment", config);
    manifest.j["seed"] = cfg.seed;
    manifest.j["config"] = io::experiment_config_to_json(cfg);
    const ExperimentReport report = run_experiment(cfg);
    const fs::path path = out / "report.csv";
    io::write_report_csv(path, report.rows());
    manifest.output(path);
    manifest.write(out / "manifest.json");
    for (const auto& e : report.estimators) {
        std::cout << e.family.name() << ": efficiency " << io::format_double(e.efficiency) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weighted M-estimation of location for clustered data"};
    app.require_subcommand(1);
    app.set_version_flag("--version", WMEST_VERSION);

    EstimateArgs est;
    auto* s_est = app.add_subcommand("estimate", "Weighted location estimate and sandwich covariance for a sample");
    s_est->add_option("sample", est.sample, "Sample CSV (cluster_id, x_1, ..., x_d)")->required();
    s_est->add_option("--weights", est.weights, "Weights CSV (cluster_id, weight); default w = 1");
    s_est->add_option("--family", est.family, "mean | spatial-median | huber | lp-median")->capture_default_str();
    s_est->add_option("--huber-k", est.huber_k, "Huber threshold")->capture_default_str();
    s_est->add_option("--lp-p", est.lp_p, "Exponent of the L_p median (> 2)")->capture_default_str();
    s_est->add_option("--tol", est.tol, "Gradient tolerance")->capture_default_str();
    s_est->add_option("--max-iter", est.max_iter, "Iteration cap")->capture_default_str();
    s_est->add_option("--out-dir", est.out_dir, "Output directory")->capture_default_str();

    std::string opt_config, opt_out = ".";
    std::optional<std::uint64_t> opt_seed;
    auto* s_opt = app.add_subcommand("optimize-weights", "Optimal per-cluster weights for an experiment config");
    s_opt->add_option("config", opt_config, "Experiment config JSON")->required();
    s_opt->add_option("--seed", opt_seed, "Override the config seed");
    s_opt->add_option("--out-dir", opt_out, "Output directory")->capture_default_str();

    BreakdownArgs bd;
    auto* s_bd = app.add_subcommand("breakdown", "Weighted breakdown point from a weights CSV");
    s_bd->add_option("weights", bd.weights, "Weights CSV (cluster_id, m_i, w_i) or (cluster_id, weight)")->required();
    auto* eps_opt = s_bd->add_option("--eps-star", bd.eps_star, "Breakdown fraction of the unweighted estimator (default 0.5)");
    s_bd->add_flag("--spatial-median-exact", bd.spatial_median_exact,
                   "Use floor((N - 1) / 2) / N, the exact unweighted spatial median value")
        ->excludes(eps_opt);
    s_bd->add_option("--eps-lower", bd.eps_lower, "Lower fraction; adds the [k1*, k0*] bracket");
    s_bd->add_option("--sample", bd.sample, "Sample CSV supplying cluster sizes for two-column weights");
    s_bd->add_flag("--normalize", bd.normalize, "Rescale weights so that sum_i m_i w_i = N");
    s_bd->add_option("--label", bd.label, "Value of the config column")->capture_default_str();
    s_bd->add_option("--rho", bd.rho, "Value of the rho column");
    s_bd->add_option("--estimator", bd.estimator, "Value of the estimator column");
    s_bd->add_option("--out-dir", bd.out_dir, "Output directory")->capture_default_str();

    ReproduceArgs rp;
    auto* s_rp = app.add_subcommand("reproduce", "Recompute a stored table and compare cell by cell");
    s_rp->add_option("--table", rp.table, "weights | efficiency-gaussian | efficiency-cauchy | efficiency-student3 | breakdown")
        ->required();
    s_rp->add_option("--seed", rp.seed, "Master seed (default $WMEST_SEED or 20150101)");
    s_rp->add_option("--replications", rp.replications, "Monte Carlo replications")->capture_default_str();
    s_rp->add_option("--threads", rp.threads, "Worker threads")->capture_default_str();
    s_rp->add_option("--data-dir", rp.data_dir, "Directory with the stored table values");
    s_rp->add_option("--config", rp.configs, "Restrict to configurations (C1..C4)");
    s_rp->add_option("--estimator", rp.estimators, "Restrict to estimator keys (mean, median, huber, lp3, ...)");
    s_rp->add_option("--out-dir", rp.out_dir, "Output directory")->capture_default_str();

    std::string ex_config, ex_out = ".";
    std::optional<std::uint64_t> ex_seed;
    std::optional<unsigned> ex_threads;
    auto* s_ex = app.add_subcommand("experiment", "Run a Monte Carlo experiment from a config JSON");
    s_ex->add_option("config", ex_config, "Experiment config JSON")->required();
    s_ex->add_option("--seed", ex_seed, "Override the config seed");
    s_ex->add_option("--threads", ex_threads, "Override the config thread count");
    s_ex->add_option("--out-dir", ex_out, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*s_est) return cmd_estimate(est);
        if (*s_opt) return cmd_optimize_weights(opt_config, opt_seed, opt_out);
        if (*s_bd) return cmd_breakdown(bd);
        if (*s_rp) return cmd_reproduce(rp);
        if (*s_ex) return cmd_experiment(ex_config, ex_seed, ex_threads, ex_out);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
