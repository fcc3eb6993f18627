#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const std::string kCli = WMEST_CLI_PATH;

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "wmest_cli_test" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

/// Runs the CLI with `args`, capturing stderr into dir/stderr.txt; returns the exit status.
int run(const fs::path& dir, const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + kCli + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " +
                            (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("estimate: two-point mean") {
    const auto d = fresh_dir("two_point");
    write_text(d / "sample.csv", "cluster_id,x1,x2\n1,1,0\n2,2,0\n");
    CHECK(run(d, "estimate " + (d / "sample.csv").string() + " --out-dir " + (d / "out").string()) == 0);
    CHECK(read_text(d / "out" / "theta.csv") == "theta_1,theta_2\n1.5,0\n");
    CHECK(fs::exists(d / "out" / "covariance.csv"));
    const auto m = nlohmann::json::parse(read_text(d / "out" / "manifest.json"));
    CHECK(m["weights"] == "w ≡ 1");
    CHECK(m["command"] == "estimate");
    CHECK(m["outputs"].size() == 2);
}

TEST_CASE("estimate: weights file and robust family") {
    const auto d = fresh_dir("weighted");
    write_text(d / "sample.csv", "cluster_id,x1,x2\n1,0,0\n1,0.5,0.1\n2,3,1\n2,2,2\n3,-1,1\n");
    write_text(d / "w.csv", "cluster_id,weight\n1,2\n2,1\n3,1\n");
    CHECK(run(d, "estimate " + (d / "sample.csv").string() + " --weights " + (d / "w.csv").string() +
                     " --family huber --huber-k 1.0 --out-dir " + (d / "out").string()) == 0);
    const auto m = nlohmann::json::parse(read_text(d / "out" / "manifest.json"));
    CHECK(m["family"] == "huber(k=1)");
    CHECK(m["converged"] == true);
}

TEST_CASE("estimate: singular bread exits 2 without covariance") {
    const auto d = fresh_dir("singular");
    write_text(d / "sample.csv", "cluster_id,x1,x2\n1,1,1\n1,1,1\n2,1,1\n");
    CHECK(run(d, "estimate " + (d / "sample.csv").string() + " --family spatial-median --out-dir " +
                     (d / "out").string()) == 2);
    CHECK_FALSE(fs::exists(d / "out" / "covariance.csv"));
    CHECK(read_text(d / "stderr.txt").find("spatial-median") != std::string::npos);
}

TEST_CASE("estimate: malformed CSV exits 1 with the line number") {
    const auto d = fresh_dir("malformed");
    write_text(d / "sample.csv", "cluster_id,x1,x2\n1,1,1\n1,x,1\n");
    CHECK(run(d, "estimate " + (d / "sample.csv").string() + " --out-dir " + (d / "out").string()) == 1);
    CHECK(read_text(d / "stderr.txt").find("sample.csv:3") != std::string::npos);
}

TEST_CASE("unknown table and bad flags exit 1") {
    const auto d = fresh_dir("bad_flags");
    CHECK(run(d, "reproduce --table nope --out-dir " + d.string()) == 1);
    CHECK(run(d, "estimate") == 1);
    CHECK(run(d, "frobnicate") == 1);
}

TEST_CASE("reproduce breakdown flags the C3 spatial median row") {
    const auto d = fresh_dir("breakdown_table");
    CHECK(run(d, "reproduce --table breakdown --out-dir " + d.string()) == 0);
    const std::string csv = read_text(d / "breakdown.csv");
    CHECK(csv.find("C3,0.2,spatial-median,,45,,,INFO,") != std::string::npos);
    std::istringstream in(csv);
    std::string line;
    bool found = false;
    while (std::getline(in, line)) {
        if (line.rfind("C3,0.2,spatial-median", 0) == 0) {
            found = true;
            CHECK(line.find(",46,") != std::string::npos);
            CHECK(line.substr(line.size() - 4) == "PASS");
        }
    }
    CHECK(found);
    CHECK(fs::exists(d / "breakdown.manifest.json"));
}

TEST_CASE("reproduce weights: C2 size-4 group mean lies in the published band") {
    const auto d = fresh_dir("weights_table");
    CHECK(run(d, "reproduce --table weights --config C2 --estimator spatial-median --out-dir " + d.string()) == 0);
    std::istringstream in(read_text(d / "weights.csv"));
    std::string line;
    std::getline(in, line);
    std::getline(in, line);  // C2, rho 0.2, cluster 1 (m = 4)
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    REQUIRE(f.size() == 16);
    CHECK(f[0] == "C2");
    CHECK(f[1] == "0.2");
    const double g = std::stod(f[12]);
    CHECK(g >= 1.80);
    CHECK(g <= 1.88);
}

TEST_CASE("reruns are byte-identical and the seed variable is honoured") {
    const auto d = fresh_dir("determinism");
    const std::string args = "reproduce --table efficiency-cauchy --config C2 --replications 40 --out-dir ";
    CHECK(run(d, args + (d / "a").string()) == 0);
    CHECK(run(d, args + (d / "b").string()) == 0);
    CHECK(run(d, args + (d / "c").string(), "WMEST_SEED=12345") == 0);
    const auto a = read_text(d / "a" / "efficiency-cauchy.csv");
    CHECK(a == read_text(d / "b" / "efficiency-cauchy.csv"));
    CHECK(a != read_text(d / "c" / "efficiency-cauchy.csv"));
    const auto m = nlohmann::json::parse(read_text(d / "c" / "efficiency-cauchy.manifest.json"));
    CHECK(m["seed"] == 12345);
}

TEST_CASE("optimize-weights feeds breakdown") {
    const auto d = fresh_dir("optimize");
    write_text(d / "config.json", R"({
        "configuration": "C1",
        "distribution": {"family": "gaussian", "rho": 0.2},
        "estimators": ["spatial-median"],
        "replications": 100,
        "seed": 7
    })");
    CHECK(run(d, "optimize-weights " + (d / "config.json").string() + " --out-dir " + (d / "out").string()) == 0);
    CHECK(fs::exists(d / "out" / "weights.csv"));
    CHECK(fs::exists(d / "out" / "trace.csv"));
    CHECK(read_text(d / "out" / "weights.csv").rfind("cluster_id,m_i,w_i\n1,4,", 0) == 0);

    CHECK(run(d, "breakdown " + (d / "out" / "weights.csv").string() + " --label C1 --out-dir " +
                     (d / "bd").string()) == 0);
    const std::string bd = read_text(d / "bd" / "breakdown.csv");
    CHECK(bd.rfind("config,rho,estimator,k_star,epsilon,prefix_sum", 0) == 0);
    CHECK(bd.find("C1,") != std::string::npos);

    CHECK(run(d, "breakdown " + (d / "out" / "weights.csv").string() + " --spatial-median-exact --out-dir " +
                     (d / "bd2").string()) == 0);
    CHECK(read_text(d / "stdout.txt").find("49/100") != std::string::npos);
    CHECK(run(d, "breakdown " + (d / "out" / "weights.csv").string() + " --spatial-median-exact --eps-star 0.4") == 1);
}

TEST_CASE("breakdown rejects unnormalized weights unless asked to rescale") {
    const auto d = fresh_dir("normalize");
    write_text(d / "w.csv", "cluster_id,m_i,w_i\n1,2,3\n2,2,1\n");
    CHECK(run(d, "breakdown " + (d / "w.csv").string() + " --out-dir " + d.string()) == 1);
    CHECK(run(d, "breakdown " + (d / "w.csv").string() + " --normalize --out-dir " + d.string()) == 0);
}

TEST_CASE("experiment writes a report") {
    const auto d = fresh_dir("experiment");
    write_text(d / "config.json", R"({
        "configuration": {"name": "small", "sizes": [3, 3, 6, 6]},
        "distribution": {"family": "cauchy", "rho": 0.5},
        "estimators": ["spatial-median", {"family": "huber", "k": 1.345}],
        "replications": 20
    })");
    CHECK(run(d, "experiment " + (d / "config.json").string() + " --out-dir " + d.string()) == 0);
    const std::string rep = read_text(d / "report.csv");
    CHECK(rep.rfind("config,distribution,rho,estimator,metric,value,stderr\n", 0) == 0);
    CHECK(rep.find("small,cauchy,0.5,\"spatial-median\",efficiency,") != std::string::npos);
}
