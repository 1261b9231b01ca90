#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "spurcor/simulation.hpp"

using namespace spurcor;

namespace {

SimScenario small_scenario() {
    SimScenario sc;
    sc.rho = 0.3;
    sc.n = 10;
    sc.p = 6;
    sc.block_size = 3;
    sc.reps = 40;
    sc.n_draws = 2000;
    sc.seed = 31;
    return sc;
}

} // namespace

TEST_CASE("gen_block_cov structure and eigenvalues") {
    const Eigen::MatrixXd cov = gen_block_cov(20, 0.3, 10);
    CHECK(cov.rows() == 20);
    CHECK(cov.diagonal().isConstant(1.0));
    CHECK(cov(0, 9) == doctest::Approx(0.3));
    CHECK(cov(0, 10) == 0.0); // across blocks
    CHECK(cov(9, 10) == 0.0);
    // uniform block eigenvalues: 1 + (bs-1)*rho once, 1 - rho with multiplicity
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    CHECK(es.eigenvalues().maxCoeff() == doctest::Approx(1.0 + 9.0 * 0.3));
    CHECK(es.eigenvalues().minCoeff() == doctest::Approx(1.0 - 0.3));
}

TEST_CASE("gen_block_cov rejects rho outside the PD range") {
    CHECK_THROWS_AS(gen_block_cov(10, 1.0, 5), ValidationError);
    CHECK_THROWS_AS(gen_block_cov(10, -0.3, 5), ValidationError); // limit is -1/4
    CHECK_NOTHROW(gen_block_cov(10, -0.2, 5));
    CHECK_NOTHROW(gen_block_cov(10, 0.99, 5));
}

TEST_CASE("gen_dataset shapes, shift, and determinism") {
    SimScenario sc = small_scenario();
    sc.mu = 5.0;
    sc.r = 0.5;
    const GroupedDataset a = gen_dataset(sc, 3);
    CHECK(a.m() == 1);
    CHECK(a.p() == 6);
    CHECK(a.n(0) == 10);
    CHECK(a.n(1) == 10);
    const GroupedDataset b = gen_dataset(sc, 3);
    CHECK((a.groups[1] - b.groups[1]).cwiseAbs().maxCoeff() == 0.0);
    const GroupedDataset c = gen_dataset(sc, 4);
    CHECK((a.groups[1] - c.groups[1]).cwiseAbs().maxCoeff() > 0.0);
    // shift lands on the first r*p case-group columns only
    const double shifted_mean = a.groups[1].leftCols(3).mean();
    const double null_mean = a.groups[1].rightCols(3).mean();
    CHECK(shifted_mean > 3.0);
    CHECK(std::fabs(null_mean) < 2.0);
    CHECK(std::fabs(a.groups[0].mean()) < 2.0);
}

TEST_CASE("gen_dataset covariance matches the target in the long run") {
    SimScenario sc = small_scenario();
    sc.n = 4000;
    const GroupedDataset ds = gen_dataset(sc, 0);
    const Eigen::MatrixXd cov =
        (ds.groups[0].rowwise() - ds.groups[0].colwise().mean()).transpose() *
        (ds.groups[0].rowwise() - ds.groups[0].colwise().mean()) / (sc.n - 1.0);
    const Eigen::MatrixXd target = gen_block_cov(6, 0.3, 3);
    CHECK((cov - target).cwiseAbs().maxCoeff() < 0.08);
}

TEST_CASE("run_simulation null mode: FWER defined, power undefined") {
    SimScenario sc = small_scenario();
    const SimReport report = run_simulation(sc);
    CHECK(report.reps_completed == 40);
    REQUIRE(report.methods.size() == 4);
    for (const auto& r : report.methods) {
        CHECK(r.fwer_defined);
        CHECK_FALSE(r.power_defined);
        CHECK(r.fwer >= 0.0);
        CHECK(r.fwer <= 1.0);
        CHECK(r.mean_adjusted_p > 0.0);
    }
}

TEST_CASE("run_simulation dominance holds per rep, hence in aggregate") {
    SimScenario sc = small_scenario();
    sc.mu = 1.2;
    sc.r = 0.5;
    sc.reps = 60;
    const SimReport report = run_simulation(sc);
    REQUIRE(report.methods.size() == 4);
    const auto& bon = report.methods[0];
    const auto& maxt = report.methods[1];
    const auto& sd = report.methods[2];
    CHECK(bon.power <= maxt.power + 1e-12);
    CHECK(maxt.power <= sd.power + 1e-12);
    CHECK(bon.mean_adjusted_p >= maxt.mean_adjusted_p - 1e-12);
    CHECK(maxt.mean_adjusted_p >= sd.mean_adjusted_p - 1e-12);
    for (const auto& r : report.methods) {
        CHECK(r.power_defined);
        CHECK(r.fwer_defined); // r=0.5 leaves true nulls
    }
}

TEST_CASE("run_simulation complete alternative: FWER undefined") {
    SimScenario sc = small_scenario();
    sc.mu = 1.2;
    sc.r = 1.0;
    sc.reps = 20;
    const SimReport report = run_simulation(sc);
    for (const auto& r : report.methods) {
        CHECK_FALSE(r.fwer_defined);
        CHECK(r.power_defined);
    }
}

TEST_CASE("run_simulation is reproducible per seed") {
    SimScenario sc = small_scenario();
    sc.reps = 20;
    const SimReport a = run_simulation(sc);
    const SimReport b = run_simulation(sc);
    REQUIRE(a.methods.size() == b.methods.size());
    for (std::size_t i = 0; i < a.methods.size(); ++i) {
        CHECK(a.methods[i].fwer == b.methods[i].fwer);
        CHECK(a.methods[i].mean_adjusted_p == b.methods[i].mean_adjusted_p);
    }
    SimScenario sc2 = sc;
    sc2.seed = 32;
    const SimReport c = run_simulation(sc2);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.methods.size(); ++i)
        if (a.methods[i].mean_adjusted_p != c.methods[i].mean_adjusted_p) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("estimate_fwer and estimate_power validate their inputs") {
    SimScenario sc = small_scenario();
    sc.reps = 10;
    CHECK_THROWS_AS(estimate_fwer(sc), ValidationError);
    sc.reps = 100;
    CHECK_THROWS_AS(estimate_power(sc), ValidationError); // no alternatives
    sc.mu = 1.0;
    sc.r = 0.5;
    CHECK_NOTHROW(estimate_power(sc));
}

TEST_CASE("corollary1_demo shape") {
    const SimReport report = corollary1_demo(30, 3.0, 30, 0.05, 17);
    REQUIRE(report.methods.size() == 2);
    CHECK(report.methods[0].method == Method::GlobalPooledNegativeControl);
    CHECK(report.methods[1].method == Method::Proposal);
    for (const auto& r : report.methods) {
        CHECK(r.fwer_defined);
        CHECK(r.power_defined);
    }
    // the strong group-2 signal is detected essentially always
    CHECK(report.methods[1].power > 0.9);
}

TEST_CASE("scenario grids have the documented shapes") {
    const auto t1 = table1_scenarios();
    REQUIRE(t1.size() == 20);
    for (const auto& sc : t1) {
        CHECK(sc.methods.size() == 3);
        CHECK(sc.m == 1);
    }
    // first 12 rows are null scenarios, last 8 carry alternatives
    for (int i = 0; i < 12; ++i) CHECK(t1[i].mu == 0.0);
    for (int i = 12; i < 20; ++i) CHECK(t1[i].mu > 0.0);
    CHECK(t1[0].rho == 0.0);
    CHECK(t1[4].n == 6);
    CHECK(t1[8].p == 20);

    const auto t2 = table2_scenarios();
    REQUIRE(t2.size() == 16);
    for (const auto& sc : t2) {
        CHECK(sc.r == 1.0);
        CHECK(sc.methods.size() == 4);
        CHECK(sc.mu > 0.0);
    }
}

TEST_CASE("scenario JSON round trip") {
    SimScenario sc = small_scenario();
    sc.mu = 1.1;
    sc.r = 0.4;
    sc.methods = {Method::Proposal};
    sc.sidedness = Sidedness::OneSidedUpper;
    const SimScenario back = scenario_from_json(scenario_to_json(sc));
    CHECK(back.rho == sc.rho);
    CHECK(back.n == sc.n);
    CHECK(back.p == sc.p);
    CHECK(back.mu == sc.mu);
    CHECK(back.r == sc.r);
    CHECK(back.seed == sc.seed);
    CHECK(back.sidedness == Sidedness::OneSidedUpper);
    REQUIRE(back.methods.size() == 1);
    CHECK(back.methods[0] == Method::Proposal);
}

TEST_CASE("scenario JSON: defaults fill in, junk is rejected") {
    const SimScenario sc = scenario_from_json("{\"rho\": 0.2}");
    CHECK(sc.rho == 0.2);
    CHECK(sc.n == 12);
    CHECK(sc.p == 50);
    CHECK_THROWS_AS(scenario_from_json("not json"), ParseError);
    CHECK_THROWS_AS(scenario_from_json("{\"methods\": [\"nope\"]}"), ValidationError);
    CHECK_THROWS_AS(scenario_from_json("{\"n\": \"twelve\"}"), ParseError);
}

TEST_CASE("report serialization") {
    SimScenario sc = small_scenario();
    sc.reps = 10;
    const SimReport report = run_simulation(sc);
    const auto j = nlohmann::json::parse(report_to_json(report));
    CHECK(j["schema_version"] == 1);
    CHECK(j["reps_completed"] == 10);
    REQUIRE(j["methods"].size() == 4);
    CHECK(j["methods"][0]["method"] == "bonferroni");
    CHECK(j["methods"][0].contains("fwer"));
    CHECK_FALSE(j["methods"][0].contains("power"));

    const std::string csv = report_to_csv(report, true);
    CHECK(csv.rfind("rho,n,p,m,mu,r,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5); // header + 4 methods
    const std::string no_header = report_to_csv(report, false);
    CHECK(std::count(no_header.begin(), no_header.end(), '\n') == 4);
}
