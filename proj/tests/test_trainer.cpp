#include "driftless/error.hpp"
#include "driftless/policy.hpp"
#include "driftless/trainer.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace driftless;
using testing_support::gradient_case;
using testing_support::gradient_error;

TEST(Mlp, ZeroNetworkGivesZeroActions) {
    const std::vector<std::size_t> w{3, 5, 2};
    const Mlp m = Mlp::zeros(w);
    const auto out = m.forward(std::vector<double>{0.3, -1.0, 2.0});
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0], 0.0);
    EXPECT_EQ(out[1], 0.0);
}

TEST(Mlp, IdentityLinearLayer) {
    DenseLayer l{Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)};
    const Mlp m({l});
    const std::vector<double> f{0.3, -1.0, 2.0};
    EXPECT_EQ(m.forward(f), f);
}

TEST(Mlp, BatchEqualsPerSample) {
    const std::vector<std::size_t> w{4, 16, 16, 3};
    const Mlp m = Mlp::random(w, 7);
    RowMatrix x = RowMatrix::Random(10, 4);
    const RowMatrix batch = m.forward(x);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const std::vector<double> f(x.row(r).data(), x.row(r).data() + 4);
        const auto one = m.forward(f);
        for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(one[k], batch(r, k), 1e-14);
    }
}

TEST(Mlp, FlattenRoundTripAndSeededInit) {
    const std::vector<std::size_t> w{4, 8, 2};
    Mlp a = Mlp::random(w, 3);
    const Mlp b = Mlp::random(w, 3);
    EXPECT_EQ(a.flatten(), b.flatten());
    EXPECT_NE(a.flatten(), Mlp::random(w, 4).flatten());
    EXPECT_EQ(a.n_params(), 4u * 8 + 8 + 8 * 2 + 2);
    const double bound = 1.0 / std::sqrt(4.0);
    for (Eigen::Index k = 0; k < a.layers()[0].weight.size(); ++k) {
        EXPECT_LE(std::abs(a.layers()[0].weight.data()[k]), bound);
    }
    auto v = a.flatten();
    v[5] = 42.0;
    a.unflatten(v);
    EXPECT_EQ(a.flatten(), v);
}

TEST(Gradient, MatchesFiniteDifferencesExponential) {
    const auto c = gradient_case(1, CostMode::Marginal, Utility::exponential(1.0), false, false, false);
    EXPECT_LT(gradient_error(c), 1e-4);
}

TEST(Gradient, MatchesFiniteDifferencesAdjustedMeanVol) {
    const auto c = gradient_case(2, CostMode::Full, Utility::adjusted_mean_vol(1.0), true, false, false);
    EXPECT_LT(gradient_error(c), 1e-4);
}

TEST(Gradient, MatchesFiniteDifferencesWithOffsetAndScale) {
    const auto c = gradient_case(3, CostMode::None, Utility::exponential(2.0), true, true, true);
    EXPECT_LT(gradient_error(c), 1e-4);
}

TEST(Gradient, DeadUnitHasZeroGradient) {
    auto c = gradient_case(4, CostMode::Marginal, Utility::exponential(1.0), false, false, false);
    auto& first = c.policy.mlp.layers()[0];
    first.bias(2) = -1e6;  // unit 2 never activates
    std::vector<double> g(c.policy.n_params());
    double gy = 0.0;
    gradient(c.problem, c.policy, c.y, g, gy);
    const std::size_t fan_in = static_cast<std::size_t>(first.weight.rows());
    const std::size_t fan_out = static_cast<std::size_t>(first.weight.cols());
    // Row-major weight block, then the bias vector.
    for (std::size_t r = 0; r < fan_in; ++r) EXPECT_EQ(g[r * fan_out + 2], 0.0);
    EXPECT_EQ(g[fan_in * fan_out + 2], 0.0);
}

TEST(Gradient, ValueMatchesEvaluate) {
    const auto c = gradient_case(5, CostMode::Marginal, Utility::exponential(1.0), true, true, false);
    std::vector<double> g(c.policy.n_params());
    double gy = 0.0;
    const double v = gradient(c.problem, c.policy, c.y, g, gy, 1e-8);
    EXPECT_NEAR(v, evaluate(c.problem, c.policy, c.y, true, 1e-8), 1e-12);
    EXPECT_THROW(gradient(c.problem, c.policy, c.y, std::span<double>(g.data(), 3), gy), Error);
}

TEST(Train, OnePeriodMatchesNewtonOptimum) {
    // Outcomes (+2, -1), equal weight: maximise -E exp(-a X), so
    // 2 exp(-2a) = exp(a), a* = log(2) / 3.
    const auto data = testing_support::one_period({2.0, -1.0});
    const Problem pb = make_problem(data, testing_support::no_cost(), Utility::exponential(1.0));
    const Solution sol = train(pb, testing_support::small_config());
    const auto a = policy_actions(pb, sol.policy);
    EXPECT_NEAR(a[0], std::log(2.0) / 3.0, 1e-3);
    EXPECT_NEAR(a[1], a[0], 1e-12);
    EXPECT_NEAR(sol.objective_value, evaluate(pb, sol.policy, sol.y_star), 1e-9);

    std::vector<double> g(sol.policy.n_params());
    double gy = 0.0;
    gradient(pb, sol.policy, sol.y_star, g, gy);
    EXPECT_LT(std::abs(gy), 1e-6);
}

TEST(Train, NoArbitrageMarketStaysFlat) {
    // Symmetric outcomes, no drift: the optimum is a = 0 with value 0.
    std::vector<double> x;
    for (int k = 0; k < 200; ++k) x.push_back(k % 2 ? 0.1 : -0.1);
    const auto data = testing_support::one_period(x);
    const Problem pb = make_problem(data, testing_support::no_cost(), Utility::exponential(1.0));
    const Solution sol = train(pb, testing_support::small_config());
    const auto a = policy_actions(pb, sol.policy);
    for (double v : a) EXPECT_LT(std::abs(v), 1e-3);
    EXPECT_NEAR(sol.objective_value, 0.0, 1e-6);
    EXPECT_NEAR(sol.y_star, 0.0, 1e-4);
}

TEST(Train, DeterministicGivenSeed) {
    const auto c = gradient_case(6, CostMode::Marginal, Utility::exponential(1.0), false, false, false);
    auto cfg = testing_support::small_config(10);
    const Solution a = train(c.problem, cfg);
    const Solution b = train(c.problem, cfg);
    EXPECT_EQ(a.policy.flatten(), b.policy.flatten());
    EXPECT_EQ(a.y_star, b.y_star);
    EXPECT_EQ(a.trace, b.trace);
    cfg.seed = 2;
    EXPECT_NE(train(c.problem, cfg).policy.flatten(), a.policy.flatten());
}

TEST(Train, ReportedObjectiveIsFreshEvaluationAndBeatsTrace) {
    const auto c = gradient_case(7, CostMode::Marginal, Utility::adjusted_mean_vol(1.0), false, false, false);
    const Solution s = train(c.problem, testing_support::small_config(20));
    EXPECT_NEAR(s.objective_value, evaluate(c.problem, s.policy, s.y_star), 1e-9);
    for (double v : s.trace) EXPECT_GE(s.objective_value, v - 1e-12);
    EXPECT_EQ(s.trace.size(), 20u);
}

TEST(Train, ExponentialClosedFormCashAgrees) {
    // Training y jointly reaches the value of setting y by the closed form.
    const auto c = gradient_case(8, CostMode::Marginal, Utility::exponential(1.0), false, false, false);
    const Solution s = train(c.problem, testing_support::small_config(20));
    const auto out = path_outcomes(c.problem, s.policy);
    std::vector<double> x(out.gains.size());
    for (std::size_t p = 0; p < x.size(); ++p) x[p] = out.gains[p] - out.costs[p];
    const double y = closed_form_y(c.problem.utility, x);
    EXPECT_NEAR(evaluate(c.problem, s.policy, y), s.objective_value, 1e-4);
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    c.epochs = 0;
    EXPECT_THROW(c.validate(), Error);
    c = TrainConfig{};
    c.learning_rate = -1.0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Problem, ShapeChecks) {
    auto data = testing_support::one_period({1.0, -1.0});
    data.features.pop_back();
    EXPECT_THROW(make_problem(data, testing_support::no_cost(), Utility::exponential(1.0)), Error);
}
