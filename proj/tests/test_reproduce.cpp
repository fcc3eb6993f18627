#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "wmest/errors.hpp"
#include "wmest/golden.hpp"
#include "wmest/reproduce.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>

using namespace wmest;

TEST_CASE("stored tables load") {
    const auto dir = golden::default_dir();
    const auto w = golden::load_weights(dir);
    CHECK(w.size() == 24);
    for (const auto& e : w) {
        CHECK(e.sizes.size() == 10);
        CHECK(std::accumulate(e.sizes.begin(), e.sizes.end(), std::size_t{0}) == 100);
    }
    CHECK(golden::load_efficiency(dir, "gaussian").size() == 48);
    CHECK(golden::load_efficiency(dir, "cauchy").size() == 16);
    CHECK(golden::load_efficiency(dir, "student3").size() == 24);
    CHECK(golden::load_breakdown(dir).size() == 16);
    CHECK(golden::find_weights(w, "huber", "C2", 0.8).weights[0] == 2.416);
    CHECK_THROWS_AS(golden::load_efficiency(dir, "student9"), InputError);
}

TEST_CASE("table selectors") {
    CHECK(parse_table_kind("efficiency-student3") == TableKind::EfficiencyStudent3);
    CHECK(table_kind_name(TableKind::Weights) == "weights");
    CHECK_THROWS_AS(parse_table_kind("table9"), InputError);
    CHECK(golden::family_for("lp4") == EstimatorFamily::lp_median(4.0));
    CHECK_THROWS_AS(golden::family_for("trimmed"), InputError);
}

TEST_CASE("breakdown table from stored weights") {
    const auto t = reproduce_table(TableKind::Breakdown);
    CHECK(t.rows.size() == 16);
    CHECK(t.all_pass());
    const auto& row = t.find("C3", 0.2, "spatial-median");
    CHECK(row.cell("epsilon_percent").reference.value() == 46.0);
    CHECK(row.cell("epsilon_percent").pass().value());
}

TEST_CASE("cell tolerance policy") {
    TableCell rel{"x", 1.1, 1.0, 0.15, true};
    CHECK(rel.pass().value());
    rel.value = 1.2;
    CHECK_FALSE(rel.pass().value());
    TableCell abs{"e", 22.0, 23.0, 1.0, false};
    CHECK(abs.pass().value());
    abs.value = 21.0;
    CHECK_FALSE(abs.pass().value());
    TableCell inf{"i", 3.0, std::nullopt, std::nullopt, true};
    CHECK_FALSE(inf.pass().has_value());
}

TEST_CASE("weights table group means for C2") {
    ReproduceOptions o;
    o.configs = {"C2"};
    o.estimators = {"spatial-median"};
    const auto t = reproduce_table(TableKind::Weights, o);
    CHECK(t.rows.size() == 20);
    const double g = t.find("C2", 0.2, "spatial-median", "1").cell("group_mean_weight").value;
    CHECK(g >= 1.70);
    CHECK(g <= 1.95);
}

TEST_CASE("mean rows are their own reference") {
    ReproduceOptions o;
    o.replications = 30;
    o.configs = {"C1"};
    o.estimators = {"mean", "huber"};
    const auto t = reproduce_table(TableKind::EfficiencyGaussian, o);
    CHECK(t.rows.size() == 4);
    for (const auto& r : t.rows) {
        if (r.estimator != "mean") continue;
        CHECK(r.cell("ratio_weighted").value == 1.0);
        CHECK(r.cell("ratio_unweighted").value == 1.0);
    }
    const auto path = std::filesystem::temp_directory_path() / "wmest_table.csv";
    write_table_csv(path, t);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("config,rho,estimator,item,ratio_weighted,ratio_weighted_reference", 0) == 0);
}
