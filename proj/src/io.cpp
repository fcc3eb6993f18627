#include "wmest/io.hpp"

#include "wmest/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace wmest::io {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string where(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

bool looks_numeric(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& where_) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
        throw InputError(where_ + ": expected a number, got '" + t + "'");
    }
    return v;
}

std::int64_t parse_int(std::string_view text, const std::string& where_) {
    const std::string t = trim(text);
    std::int64_t v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw InputError(where_ + ": expected an integer, got '" + t + "'");
    }
    return v;
}

std::vector<CsvRecord> read_csv(const std::filesystem::path& path, bool* had_header) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::vector<CsvRecord> out;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        CsvRecord rec;
        rec.line = lineno;
        std::stringstream ss(t);
        std::string field;
        while (std::getline(ss, field, ',')) rec.fields.push_back(trim(field));
        if (t.back() == ',') rec.fields.emplace_back();
        if (out.empty() && !header && !looks_numeric(rec.fields.front())) {
            header = true;
            continue;
        }
        out.push_back(std::move(rec));
    }
    if (had_header) *had_header = header;
    return out;
}

SampleFile read_sample_csv(const std::filesystem::path& path) {
    const auto records = read_csv(path);
    if (records.empty()) throw InputError(path.string() + ": no data rows");
    std::vector<std::int64_t> ids;
    std::map<std::int64_t, std::size_t> index;
    std::vector<std::vector<Point>> clusters;
    std::size_t dim = 0;
    for (const auto& rec : records) {
        const std::string at = where(path, rec.line);
        if (rec.fields.size() < 2) throw InputError(at + ": expected cluster_id followed by coordinates");
        if (dim == 0) dim = rec.fields.size() - 1;
        if (rec.fields.size() - 1 != dim) {
            throw InputError(at + ": expected " + std::to_string(dim) + " coordinates, got " +
                             std::to_string(rec.fields.size() - 1));
        }
        const std::int64_t id = parse_int(rec.fields[0], at);
        Point p(static_cast<Eigen::Index>(dim));
        for (std::size_t k = 0; k < dim; ++k) p(static_cast<Eigen::Index>(k)) = parse_double(rec.fields[k + 1], at);
        auto [it, inserted] = index.emplace(id, clusters.size());
        if (inserted) {
            ids.push_back(id);
            clusters.emplace_back();
        }
        clusters[it->second].push_back(std::move(p));
    }
    return SampleFile{ClusteredSample::from_points(clusters), std::move(ids)};
}

void write_sample_csv(const std::filesystem::path& path, const ClusteredSample& sample,
                      const std::vector<std::int64_t>& cluster_ids) {
    if (cluster_ids.size() != sample.cluster_count()) throw InputError("cluster id list does not match the sample");
    auto out = open_out(path);
    out << "cluster_id";
    for (Eigen::Index k = 0; k < sample.dim(); ++k) out << ",x" << k + 1;
    out << '\n';
    for (std::size_t i = 0; i < sample.cluster_count(); ++i) {
        const Matrix& c = sample.cluster(i);
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
            out << cluster_ids[i];
            for (Eigen::Index k = 0; k < c.rows(); ++k) out << ',' << format_double(c(k, j));
            out << '\n';
        }
    }
}

WeightsFile read_weights_csv(const std::filesystem::path& path) {
    const auto records = read_csv(path);
    if (records.empty()) throw InputError(path.string() + ": no data rows");
    WeightsFile wf;
    for (const auto& rec : records) {
        const std::string at = where(path, rec.line);
        if (rec.fields.size() != 2 && rec.fields.size() != 3) {
            throw InputError(at + ": expected cluster_id,weight or cluster_id,m_i,w_i");
        }
        const std::int64_t id = parse_int(rec.fields[0], at);
        const double w = parse_double(rec.fields.back(), at);
        if (!(w > 0.0)) throw InputError(at + ": weights must be strictly positive");
        if (!wf.weights.emplace(id, w).second) throw InputError(at + ": duplicate cluster_id " + std::to_string(id));
        if (rec.fields.size() == 3) {
            const std::int64_t m = parse_int(rec.fields[1], at);
            if (m < 1) throw InputError(at + ": cluster size must be positive");
            wf.sizes.emplace(id, static_cast<std::size_t>(m));
        }
    }
    return wf;
}

std::vector<double> weights_for(const WeightsFile& file, const std::vector<std::int64_t>& cluster_ids,
                                const std::string& source) {
    std::vector<double> out;
    out.reserve(cluster_ids.size());
    for (std::int64_t id : cluster_ids) {
        const auto it = file.weights.find(id);
        if (it == file.weights.end()) throw InputError(source + ": no weight for cluster_id " + std::to_string(id));
        out.push_back(it->second);
    }
    return out;
}

void write_weights_csv(const std::filesystem::path& path, const std::vector<std::int64_t>& cluster_ids,
                       const std::vector<std::size_t>& sizes, const std::vector<double>& weights) {
    if (cluster_ids.size() != sizes.size() || sizes.size() != weights.size()) {
        throw InputError("weights table columns differ in length");
    }
    auto out = open_out(path);
    out << "cluster_id,m_i,w_i\n";
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        out << cluster_ids[i] << ',' << sizes[i] << ',' << format_double(weights[i]) << '\n';
    }
}

void write_theta_csv(const std::filesystem::path& path, const Point& theta) {
    auto out = open_out(path);
    for (Eigen::Index k = 0; k < theta.size(); ++k) out << (k ? "," : "") << "theta_" << k + 1;
    out << '\n';
    for (Eigen::Index k = 0; k < theta.size(); ++k) out << (k ? "," : "") << format_double(theta(k));
    out << '\n';
}

void write_covariance_csv(const std::filesystem::path& path, const CovarianceReport& report) {
    auto out = open_out(path);
    const Eigen::Index d = report.Sigma_hat.rows();
    out << "block,row";
    for (Eigen::Index k = 0; k < d; ++k) out << ",c" << k + 1;
    out << '\n';
    const std::pair<const char*, const Matrix*> blocks[] = {
        {"B_hat", &report.B_hat}, {"C_hat", &report.C_hat}, {"V_hat", &report.V_hat}, {"Sigma_hat", &report.Sigma_hat}};
    for (const auto& [name, m] : blocks) {
        for (Eigen::Index r = 0; r < m->rows(); ++r) {
            out << name << ',' << r + 1;
            for (Eigen::Index c = 0; c < m->cols(); ++c) out << ',' << format_double((*m)(r, c));
            out << '\n';
        }
    }
    out << "eval_point,1";
    for (Eigen::Index k = 0; k < report.eval_point.size(); ++k) out << ',' << format_double(report.eval_point(k));
    out << '\n';
    out << "condition_V,1," << format_double(report.condition_V) << '\n';
}

void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
    auto out = open_out(path);
    out << "config,distribution,rho,estimator,metric,value,stderr\n";
    for (const auto& r : rows) {
        out << r.config << ',' << r.distribution << ',' << format_double(r.rho) << ',' << '"' << r.estimator << '"'
            << ',' << r.metric << ',' << format_double(r.value) << ',';
        if (r.stderr_value) out << format_double(*r.stderr_value);
        out << '\n';
    }
}

void write_breakdown_csv(const std::filesystem::path& path, const std::vector<BreakdownRow>& rows) {
    auto out = open_out(path);
    out << "config,rho,estimator,k_star,epsilon,prefix_sum,n_total,threshold,k1_star,k0_star\n";
    for (const auto& r : rows) {
        const auto& b = r.report;
        out << r.config << ',' << r.rho << ',' << '"' << r.estimator << '"' << ',' << b.k_star << ','
            << format_double(b.epsilon_star.value()) << ',' << format_double(b.prefix_sum_at_k) << ',' << b.total
            << ',' << format_double(b.threshold_used) << ',' << b.k1_star << ',' << b.k0_star << '\n';
    }
}

// ---------------------------------------------------------------------------
// JSON experiment config

EstimatorFamily family_from_json(const nlohmann::json& j) {
    if (j.is_string()) return EstimatorFamily::parse(j.get<std::string>());
    if (!j.is_object() || !j.contains("family")) throw InputError("estimator entry needs a 'family' field");
    const auto name = j.at("family").get<std::string>();
    return EstimatorFamily::parse(name, j.value("k", EstimatorFamily::kDefaultHuberK), j.value("p", 3.0));
}

nlohmann::json family_to_json(const EstimatorFamily& fam) {
    switch (fam.kind()) {
        case FamilyKind::Mean: return "mean";
        case FamilyKind::SpatialMedian: return "spatial-median";
        case FamilyKind::Huber: return {{"family", "huber"}, {"k", fam.parameter()}};
        case FamilyKind::LpMedian: return {{"family", "lp-median"}, {"p", fam.parameter()}};
    }
    return nullptr;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    try {
        ExperimentConfig cfg;
        const auto& c = j.at("configuration");
        if (c.is_string()) {
            cfg.configuration = ClusterConfiguration::named(c.get<std::string>());
        } else {
            cfg.configuration = ClusterConfiguration::custom(c.at("sizes").get<std::vector<std::size_t>>());
            cfg.configuration.name = c.value("name", std::string("custom"));
        }

        const auto& d = j.at("distribution");
        const auto fam = d.value("family", std::string("gaussian"));
        const double rho = d.at("rho").get<double>();
        const auto dim = static_cast<Eigen::Index>(d.value("d", 2));
        if (fam == "gaussian") {
            cfg.distribution = DistributionSpec::gaussian(rho, dim);
        } else if (fam == "student") {
            cfg.distribution = DistributionSpec::student(d.at("nu").get<double>(), rho, dim);
        } else if (fam == "cauchy") {
            cfg.distribution = DistributionSpec::cauchy(rho, dim);
        } else {
            throw InputError("unknown distribution family '" + fam + "'");
        }
        if (d.contains("theta")) {
            const auto t = d.at("theta").get<std::vector<double>>();
            cfg.distribution.theta = Eigen::Map<const Point>(t.data(), static_cast<Eigen::Index>(t.size()));
            cfg.distribution.validate();
        }

        for (const auto& e : j.at("estimators")) cfg.estimators.push_back(family_from_json(e));

        const auto src = j.value("weights_source", std::string("optimal"));
        if (src == "unweighted") {
            cfg.weights_source = WeightsSource::Unweighted;
        } else if (src == "optimal") {
            cfg.weights_source = WeightsSource::Optimal;
        } else if (src == "file") {
            cfg.weights_source = WeightsSource::File;
            if (j.contains("file_weights")) {
                cfg.file_weights = j.at("file_weights").get<std::vector<double>>();
            } else {
                std::filesystem::path wp = j.at("weights_file").get<std::string>();
                if (wp.is_relative() && !base_dir.empty()) wp = base_dir / wp;
                const WeightsFile wf = read_weights_csv(wp);
                std::vector<std::int64_t> ids(cfg.configuration.sizes.size());
                for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i + 1);
                cfg.file_weights = weights_for(wf, ids, wp.string());
            }
        } else {
            throw InputError("unknown weights_source '" + src + "'");
        }

        cfg.replications = j.value("replications", std::size_t{500});
        cfg.seed = j.value("seed", cfg.seed);
        const auto ep = j.value("eval_point", std::string("true_theta"));
        if (ep == "true_theta") {
            cfg.eval_point = EvalPoint::TrueTheta;
        } else if (ep == "estimated") {
            cfg.eval_point = EvalPoint::Estimated;
        } else {
            throw InputError("unknown eval_point '" + ep + "'");
        }
        if (j.contains("reference")) cfg.reference = family_from_json(j.at("reference"));
        cfg.threads = j.value("threads", 1u);
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("experiment config: ") + e.what());
    }
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    if (cfg.configuration.name == "custom") {
        j["configuration"] = {{"name", "custom"}, {"sizes", cfg.configuration.sizes}};
    } else {
        j["configuration"] = cfg.configuration.name;
    }
    nlohmann::json d;
    switch (cfg.distribution.family) {
        case DistributionFamily::Gaussian: d["family"] = "gaussian"; break;
        case DistributionFamily::Student: d["family"] = "student"; d["nu"] = cfg.distribution.nu; break;
        case DistributionFamily::Cauchy: d["family"] = "cauchy"; break;
    }
    d["rho"] = cfg.distribution.rho;
    d["d"] = cfg.distribution.dim;
    d["theta"] = std::vector<double>(cfg.distribution.theta.data(), cfg.distribution.theta.data() + cfg.distribution.theta.size());
    j["distribution"] = d;
    j["estimators"] = nlohmann::json::array();
    for (const auto& e : cfg.estimators) j["estimators"].push_back(family_to_json(e));
    switch (cfg.weights_source) {
        case WeightsSource::Unweighted: j["weights_source"] = "unweighted"; break;
        case WeightsSource::Optimal: j["weights_source"] = "optimal"; break;
        case WeightsSource::File: j["weights_source"] = "file"; j["file_weights"] = cfg.file_weights; break;
    }
    j["replications"] = cfg.replications;
    j["seed"] = cfg.seed;
    j["eval_point"] = cfg.eval_point == EvalPoint::TrueTheta ? "true_theta" : "estimated";
    if (cfg.reference) j["reference"] = family_to_json(*cfg.reference);
    j["threads"] = cfg.threads;
    return j;
}

}  // namespace wmest::io
