#include <doctest.h>

#include <cmath>

#include "spurcor/mvn.hpp"
#include "spurcor/rng.hpp"

using namespace spurcor;

namespace {

CorrelationModel uniform_model(int d, double rho) {
    CorrelationModel model;
    model.m = 1;
    model.p = d;
    model.psi = Eigen::MatrixXd::Constant(d, d, rho);
    model.psi.diagonal().setOnes();
    model.pd = true;
    return model;
}

std::vector<int> iota_subset(int d) {
    std::vector<int> s(d);
    for (int i = 0; i < d; ++i) s[i] = i;
    return s;
}

} // namespace

TEST_CASE("normal quantile/cdf/tail reference values") {
    // Wichura's algorithm is accurate to ~1e-15 at these points
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(normal_quantile(0.99) == doctest::Approx(2.326347874040841).epsilon(1e-12));
    CHECK(normal_quantile(0.001) == doctest::Approx(-3.090232306167814).epsilon(1e-12));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
    CHECK(normal_tail(1.959963984540054) == doctest::Approx(0.025).epsilon(1e-12));
    CHECK(normal_tail(-1.0) + normal_tail(1.0) == doctest::Approx(1.0).epsilon(1e-14));
    // round trip over a grid
    for (double p : {1e-6, 0.01, 0.2, 0.5, 0.8, 0.99, 1.0 - 1e-6})
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-11));
}

TEST_CASE("xoshiro stream basics") {
    Xoshiro256 a(12345), b(12345), c(54321);
    CHECK(a.next_u64() == b.next_u64());
    CHECK(a.next_u64() == b.next_u64());
    CHECK(a.next_u64() != c.next_u64());
    for (int i = 0; i < 1000; ++i) {
        const double u = a.next_uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("derive_seed separates labels and indices") {
    CHECK(derive_seed(1, "pool", 0) == derive_seed(1, "pool", 0));
    CHECK(derive_seed(1, "pool", 0) != derive_seed(1, "pool", 1));
    CHECK(derive_seed(1, "pool", 0) != derive_seed(1, "repair", 0));
    CHECK(derive_seed(1, "pool", 0) != derive_seed(2, "pool", 0));
}

TEST_CASE("pool marginals are standard normal") {
    const CorrelationModel model = uniform_model(3, 0.5);
    GaussianPool pool(model.psi, 60000, 99);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(3), second = Eigen::VectorXd::Zero(3);
    // recompute moments through the tail interface: P(Z_j > 0) ~ 1/2
    for (int j = 0; j < 3; ++j) {
        const TailEstimate t0 = pool.tail_prob(0.0, {j}, Sidedness::OneSidedUpper);
        CHECK(t0.estimate == doctest::Approx(0.5).epsilon(0.03));
        const TailEstimate t196 = pool.tail_prob(1.959963984540054, {j}, Sidedness::TwoSided);
        CHECK(std::fabs(t196.estimate - 0.05) < 4.0 * t196.mc_se + 1e-9);
    }
}

TEST_CASE("independent maxima match the Sidak bound") {
    // d independent variables: P(max |Z| > c) = 1 - (1 - 2*(1-Phi(c)))^d
    const CorrelationModel model = uniform_model(5, 0.0);
    GaussianPool pool(model.psi, 100000, 314);
    const double c = 2.0;
    const double marg = 2.0 * normal_tail(c);
    const double expected = 1.0 - std::pow(1.0 - marg, 5);
    const TailEstimate t = pool.tail_prob(c, iota_subset(5), Sidedness::TwoSided);
    CHECK(std::fabs(t.estimate - expected) < 4.0 * t.mc_se + 1e-9);
}

TEST_CASE("perfect correlation collapses the maximum to one variable") {
    const CorrelationModel model = uniform_model(4, 1.0 - 1e-6);
    GaussianPool pool(model.psi, 100000, 2718);
    const double c = pool.critical_value(0.05, iota_subset(4), Sidedness::TwoSided);
    // max over perfectly correlated variables behaves like a single one
    CHECK(c == doctest::Approx(1.959963984540054).epsilon(0.02));
}

TEST_CASE("critical_value at d=2, independent, matches the Sidak quantile") {
    const CorrelationModel model = uniform_model(2, 0.0);
    GaussianPool pool(model.psi, 200000, 11);
    const double c = pool.critical_value(0.05, iota_subset(2), Sidedness::TwoSided);
    // Phi^{-1}((1 + (1-alpha)^{1/2}) / 2)
    const double expected = normal_quantile((1.0 + std::sqrt(0.95)) / 2.0);
    CHECK(c == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("critical_value and tail_prob are mutually consistent") {
    const CorrelationModel model = uniform_model(4, 0.3);
    GaussianPool pool(model.psi, 50000, 4242);
    const auto subset = iota_subset(4);
    const double c = pool.critical_value(0.05, subset, Sidedness::TwoSided);
    const TailEstimate t = pool.tail_prob(c, subset, Sidedness::TwoSided);
    // on the same pool the empirical tail at its own quantile is <= alpha and
    // close to it
    CHECK(t.estimate <= 0.05 + 1e-12);
    CHECK(t.estimate > 0.05 - 5.0 / 50000.0 - 3.0 * t.mc_se);
}

TEST_CASE("subset monotonicity on a shared pool") {
    const CorrelationModel model = uniform_model(6, 0.2);
    GaussianPool pool(model.psi, 20000, 8);
    const double c = 2.2;
    double prev = 0.0;
    for (int d = 1; d <= 6; ++d) {
        const TailEstimate t = pool.tail_prob(c, iota_subset(d), Sidedness::TwoSided);
        CHECK(t.estimate >= prev); // exact on a shared pool
        prev = t.estimate;
    }
}

TEST_CASE("pool is reproducible and blocked generation is stable") {
    const CorrelationModel model = uniform_model(3, 0.4);
    GaussianPool a(model.psi, 3000, 77), b(model.psi, 3000, 77);
    const auto subset = iota_subset(3);
    CHECK(a.tail_prob(1.5, subset, Sidedness::TwoSided).estimate ==
          b.tail_prob(1.5, subset, Sidedness::TwoSided).estimate);
    // a shorter pool is a prefix of a longer one (blocked sub-streams)
    GaussianPool small(model.psi, 1024, 77);
    const double n_small = 1024, n_large = 3000;
    const double count_small = small.tail_prob(1.0, subset, Sidedness::TwoSided).estimate * n_small;
    GaussianPool large(model.psi, 3000, 77);
    const double count_large = large.tail_prob(1.0, subset, Sidedness::TwoSided).estimate * n_large;
    CHECK(count_large >= count_small - 1e-6);
}

TEST_CASE("pool rejects an indefinite matrix") {
    Eigen::MatrixXd bad = Eigen::MatrixXd::Constant(4, 4, -0.5);
    bad.diagonal().setOnes();
    CHECK_THROWS_AS(GaussianPool(bad, 100, 1), NumericError);
}

TEST_CASE("pool accepts a singular PSD matrix") {
    Eigen::MatrixXd singular = Eigen::MatrixXd::Constant(3, 3, 1.0);
    GaussianPool pool(singular, 5000, 5);
    // all coordinates identical: two-sided max tail equals the marginal tail
    const TailEstimate t = pool.tail_prob(1.96, iota_subset(3), Sidedness::TwoSided);
    const TailEstimate single = pool.tail_prob(1.96, {0}, Sidedness::TwoSided);
    CHECK(t.estimate == single.estimate);
}

TEST_CASE("step_down_adjusted: two-hypothesis worked example") {
    const CorrelationModel model = uniform_model(2, 0.0);
    GaussianPool pool(model.psi, 200000, 1234);
    // statistics 10 and 2.0 (two-sided): rank 0 is essentially never exceeded,
    // rank 1 reduces to the marginal test of a single variable
    const std::vector<int> order{0, 1};
    const std::vector<double> thresholds{10.0, 2.0};
    const auto adj = pool.step_down_adjusted(order, thresholds, Sidedness::TwoSided);
    REQUIRE(adj.size() == 2);
    CHECK(adj[0] <= 2.0 * 2.0 * normal_tail(10.0)); // Bonferroni cap bites
    const double expected = 2.0 * normal_tail(2.0); // 0.0455
    CHECK(adj[1] == doctest::Approx(expected).epsilon(0.05));
    CHECK(adj[0] <= adj[1]); // monotone in rank
}

TEST_CASE("step_down_adjusted is monotone and capped") {
    const CorrelationModel model = uniform_model(5, 0.3);
    GaussianPool pool(model.psi, 30000, 99);
    const std::vector<int> order{3, 1, 4, 0, 2};
    const std::vector<double> thresholds{3.1, 2.6, 2.0, 1.2, 0.4};
    const auto adj = pool.step_down_adjusted(order, thresholds, Sidedness::TwoSided);
    for (std::size_t r = 1; r < adj.size(); ++r) CHECK(adj[r] >= adj[r - 1]);
    for (std::size_t r = 0; r < adj.size(); ++r) {
        CHECK(adj[r] <= 1.0);
        CHECK(adj[r] <=
              (5.0 - r) * marginal_tail(thresholds[r], Sidedness::TwoSided) + 1e-12);
    }
}

TEST_CASE("single_step_adjusted dominates step_down_adjusted on a shared pool") {
    const CorrelationModel model = uniform_model(4, 0.5);
    GaussianPool pool(model.psi, 30000, 31);
    const std::vector<int> order{2, 0, 3, 1};
    const std::vector<double> thresholds{2.9, 2.1, 1.7, 0.9};
    const auto sd = pool.step_down_adjusted(order, thresholds, Sidedness::TwoSided);
    const auto ss = pool.single_step_adjusted(thresholds, Sidedness::TwoSided);
    for (std::size_t r = 0; r < sd.size(); ++r) CHECK(sd[r] <= ss[r] + 1e-12);
}

TEST_CASE("adjusted_pvalues single-step path") {
    const CorrelationModel model = uniform_model(3, 0.0);
    TMatrix t;
    t.sidedness = Sidedness::TwoSided;
    t.values = Eigen::MatrixXd{{2.5, -1.0, 0.3}};
    const auto adj = adjusted_pvalues(t, model, {{0, 1, 2}}, 50000, 17);
    REQUIRE(adj.size() == 3);
    // P(max > 2.5) for 3 independent: 1 - (1 - 2*tail(2.5))^3
    const double expected = 1.0 - std::pow(1.0 - 2.0 * normal_tail(2.5), 3);
    CHECK(adj[0] == doctest::Approx(expected).epsilon(0.15));
    CHECK(adj[0] < adj[1]);
    CHECK(adj[1] < adj[2]);
}

TEST_CASE("adjusted_pvalues step-down path returns model order") {
    const CorrelationModel model = uniform_model(3, 0.2);
    TMatrix t;
    t.sidedness = Sidedness::TwoSided;
    t.values = Eigen::MatrixXd{{1.0, 3.0, -2.0}};
    // decreasing magnitudes: 1 (3.0), 2 (2.0), 0 (1.0)
    const std::vector<std::vector<int>> seq{{0, 1, 2}, {0, 2}, {0}};
    const auto adj = adjusted_pvalues(t, model, seq, 40000, 23);
    REQUIRE(adj.size() == 3);
    CHECK(adj[1] <= adj[2]);
    CHECK(adj[2] <= adj[0]);
    // rank-0 value also bounded by the full-set Bonferroni cap
    CHECK(adj[1] <= 3.0 * 2.0 * normal_tail(3.0) + 1e-12);
}

TEST_CASE("adjusted_pvalues rejects a malformed sequence") {
    const CorrelationModel model = uniform_model(3, 0.0);
    TMatrix t;
    t.sidedness = Sidedness::TwoSided;
    t.values = Eigen::MatrixXd{{1.0, 2.0, 3.0}};
    CHECK_THROWS_AS(adjusted_pvalues(t, model, {{0, 1, 2}, {1}}, 1000, 1), ValidationError);
    CHECK_THROWS_AS(adjusted_pvalues(t, model, {{0, 1, 2}, {0, 1}, {2}}, 1000, 1),
                    ValidationError);
    CHECK_THROWS_AS(adjusted_pvalues(t, model, {}, 1000, 1), ValidationError);
}

TEST_CASE("marginal_tail") {
    CHECK(marginal_tail(1.959963984540054, Sidedness::TwoSided) ==
          doctest::Approx(0.05).epsilon(1e-10));
    CHECK(marginal_tail(-1.959963984540054, Sidedness::TwoSided) ==
          doctest::Approx(0.05).epsilon(1e-10));
    CHECK(marginal_tail(1.6448536269514722, Sidedness::OneSidedUpper) ==
          doctest::Approx(0.05).epsilon(1e-10));
}
