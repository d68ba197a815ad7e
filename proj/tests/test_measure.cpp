#include "driftless/error.hpp"
#include "driftless/measure.hpp"
#include "driftless/var_model.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

using namespace driftless;

namespace {

struct SmallMarket {
    DlvGrid grid;
    PathBundle bundle;
    std::vector<InstrumentSpec> instruments;
    ProblemData data;
};

SmallMarket small_market(double drift, std::size_t paths = 2000, std::size_t steps = 5) {
    SmallMarket m;
    m.grid = make_grid({0.95, 1.0, 1.05}, {20, 40, 60}, 0.5);
    const auto mk = synthetic_market(m.grid, drift);
    m.bundle = simulate(mk.params, m.grid, mk.init_prev, mk.init, paths, steps, 11);
    m.instruments = grid_instruments(m.grid);
    m.data = make_problem_data(m.bundle, m.instruments);
    return m;
}

CostSpec marginal(double gamma) {
    CostSpec s;
    s.gamma = {gamma};
    s.mode = CostMode::Marginal;
    return s;
}

double weighted_mean(const std::vector<double>& x, const std::vector<double>& w) {
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        a += w[k] * x[k];
        b += w[k];
    }
    return a / b;
}

}  // namespace

TEST(Memm, SymmetricOutcomes) {
    const std::vector<double> x{1.0, -1.0}, p{0.5, 0.5};
    const auto r = memm_one_period(x, p, 1.0);
    EXPECT_NEAR(r.a_star, 0.0, 1e-15);
    EXPECT_NEAR(r.q[0], 0.5, 1e-15);
    EXPECT_NEAR(r.q[1], 0.5, 1e-15);
}

TEST(Memm, TwoOutcomesSolveLinearMartingaleCondition) {
    const std::vector<double> x{2.0, -1.0}, p{0.5, 0.5};
    const auto r = memm_one_period(x, p, 1.0);
    EXPECT_NEAR(r.q[0], 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(r.q[1], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(r.a_star, std::log(2.0) / 3.0, 1e-12);
}

TEST(Memm, ThreeOutcomesAgainstBisection) {
    const std::vector<double> x{1.0, 0.0, -1.0}, p{0.5, 0.25, 0.25};
    const double lambda = 1.5;
    const auto r = memm_one_period(x, p, lambda);
    // Independent oracle: bisection on E_p[x e^{-b x}] = 0.
    double lo = -10.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
        const double b = 0.5 * (lo + hi);
        double g = 0.0;
        for (std::size_t k = 0; k < 3; ++k) g += p[k] * x[k] * std::exp(-b * x[k]);
        if (g > 0.0) lo = b; else hi = b;
    }
    const double b = 0.5 * (lo + hi);
    EXPECT_NEAR(r.a_star, b / lambda, 1e-12);
    EXPECT_NEAR(r.q[0], r.q[2], 1e-12);
    double eq = 0.0, z = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        eq += r.q[k] * x[k];
        z += p[k] * std::exp(-lambda * r.a_star * x[k]);
    }
    EXPECT_NEAR(eq, 0.0, 1e-12);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(r.q[k], p[k] * std::exp(-lambda * r.a_star * x[k]) / z, 1e-14);
}

TEST(Memm, OneSignedOutcomesAreArbitrage) {
    const std::vector<double> x{1.0, 0.5}, p{0.5, 0.5};
    try {
        memm_one_period(x, p, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Arbitrage);
    }
}

TEST(Density, OnePeriodMatchesMemm) {
    for (const auto& setup : std::vector<std::pair<std::vector<double>, std::vector<double>>>{
             {{2.0, -1.0}, {0.5, 0.5}}, {{1.0, 0.0, -1.0}, {0.5, 0.25, 0.25}}}) {
        const auto& x = setup.first;
        std::vector<double> w(setup.second);
        for (double& v : w) v *= static_cast<double>(w.size());
        const auto data = testing_support::one_period(x);
        const Problem pb = make_problem(data, testing_support::no_cost(), Utility::exponential(1.0), w);
        const Solution sol = train(pb, testing_support::small_config());
        const DensityWeights d = density(pb, sol);
        EXPECT_EQ(d.mode, DensityMode::Martingale);
        EXPECT_LT(d.mean_error, 1e-6);
        const auto ref = memm_one_period(x, setup.second, 1.0);
        for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(setup.second[k] * d.weights[k], ref.q[k], 1e-3);
    }
}

TEST(Density, ExponentialCancellationIdentity) {
    const auto m = small_market(0.5, 300, 3);
    const Problem pb = make_problem(m.data, marginal(0.001), Utility::exponential(2.0));
    Solution sol = train(pb, testing_support::small_config(10));
    const DensityWeights d = density(pb, sol);
    EXPECT_EQ(d.mode, DensityMode::NearMartingale);
    const auto out = path_outcomes(pb, sol.policy);
    std::vector<double> e(out.gains.size());
    for (std::size_t p = 0; p < e.size(); ++p) e[p] = std::exp(-2.0 * (out.gains[p] - out.costs[p]));
    const double mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
    for (std::size_t p = 0; p < e.size(); ++p) EXPECT_NEAR(d.weights[p], e[p] / mean, 1e-10);

    for (double shift : {-1.0, 1.0}) {
        Solution moved = sol;
        moved.y_star += shift;
        const DensityWeights dm = density(pb, moved);
        for (std::size_t p = 0; p < e.size(); ++p) EXPECT_NEAR(dm.weights[p], d.weights[p], 1e-10);
    }
}

TEST(Density, DriftlessCostlessIsFlat) {
    std::vector<double> x;
    for (int k = 0; k < 400; ++k) x.push_back(k % 2 ? 0.05 : -0.05);
    const auto data = testing_support::one_period(x);
    const Problem pb = make_problem(data, testing_support::no_cost(), Utility::exponential(1.0));
    const DensityWeights d = density(pb, train(pb, testing_support::small_config()));
    for (double w : d.weights) EXPECT_NEAR(w, 1.0, 0.05);
}

TEST(Density, RejectsFullCostSolutions) {
    auto c = testing_support::gradient_case(10, CostMode::Full, Utility::exponential(1.0), false, false, false);
    Solution s;
    s.policy = c.policy;
    EXPECT_THROW(density(c.problem, s), Error);
}

TEST(Divergence, KnownValues) {
    const Utility u = Utility::exponential(1.0);
    EXPECT_EQ(divergence(std::vector<double>(7, 1.0), u).value, 0.0);
    const std::vector<double> d{0.5, 1.5};
    const double ref = 0.5 * ((1 - 0.5 + 0.5 * std::log(0.5)) + (1 - 1.5 + 1.5 * std::log(1.5)));
    EXPECT_NEAR(divergence(d, u).value, ref, 1e-15);
    EXPECT_NEAR(divergence(d, u).value, 0.130812, 1e-6);
    // Relative entropy at mean-1 weights.
    EXPECT_NEAR(divergence(d, u).value, 0.5 * (0.5 * std::log(0.5) + 1.5 * std::log(1.5)), 1e-15);
}

TEST(Divergence, AdjustedMeanVolDomain) {
    const std::vector<double> d{0.1, 1.9};
    EXPECT_NO_THROW(divergence(d, Utility::adjusted_mean_vol(1.0)));
    const std::vector<double> bad{0.0 + 1e-3, 2.0};
    EXPECT_THROW(divergence(bad, Utility::adjusted_mean_vol(1.0)), Error);
}

TEST(Divergence, DualityOnOnePeriod) {
    // sup F = E[u~(D*)] at the optimum.
    const auto data = testing_support::one_period({0.3, -0.1, 0.05, -0.2, 0.15});
    for (const auto& u : {Utility::exponential(1.0), Utility::adjusted_mean_vol(1.0)}) {
        const Problem pb = make_problem(data, testing_support::no_cost(), u);
        const Solution sol = train(pb, testing_support::small_config());
        const DensityWeights d = density(pb, sol);
        EXPECT_NEAR(divergence(d.weights, u).value, sol.objective_value, 1e-8) << u.name();
    }
}

TEST(VerifyDrift, UniformWeightsOnDriftlessMarketPass) {
    const auto m = small_market(0.0);
    const auto rep = verify_drift(m.bundle, m.instruments, m.data.returns, {}, marginal(0.001));
    EXPECT_EQ(rep.failures(), 0u);
    EXPECT_EQ(rep.rows.size(), 5u * 10u);
    for (const auto& r : rep.rows) EXPECT_GT(r.se, 0.0);
}

TEST(VerifyDrift, StrongDriftFailsSpotRow) {
    const auto m = small_market(3.0);
    const auto rep = verify_drift(m.bundle, m.instruments, m.data.returns, {}, marginal(0.001));
    for (const auto& r : rep.rows) {
        if (r.label == "spot") EXPECT_FALSE(r.pass) << r.t;
    }
}

TEST(VerifyDrift, DensityWeightsPass) {
    const auto m = small_market(1.0);
    const CostSpec spec = marginal(0.001);
    const Problem pb = make_problem(m.data, spec, Utility::exponential(1.0));
    auto cfg = testing_support::small_config(40);
    cfg.hidden = {32, 32};
    cfg.batch_size = 500;
    cfg.learning_rate = 3e-3;
    cfg.final_learning_rate = 1e-4;
    const DensityWeights d = density(pb, train(pb, cfg));
    EXPECT_LT(d.mean_error, 0.02);
    const auto uni = verify_drift(m.bundle, m.instruments, m.data.returns, {}, spec);
    const auto rep = verify_drift(m.bundle, m.instruments, m.data.returns, d.weights, spec);
    EXPECT_GE(uni.failures(), 1u);
    EXPECT_EQ(rep.failures(), 0u);
}

TEST(VerifyDrift, FrictionlessBandIsCentred) {
    const auto m = small_market(0.0, 300, 3);
    CostSpec none;
    none.mode = CostMode::None;
    const auto rep = verify_drift(m.bundle, m.instruments, m.data.returns, {}, none);
    for (const auto& r : rep.rows) {
        EXPECT_EQ(r.band_lo, 0.0);
        EXPECT_EQ(r.band_hi, 0.0);
    }
    const auto spec = marginal(0.001);
    const auto rep2 = verify_drift(m.bundle, m.instruments, m.data.returns, {}, spec);
    for (const auto& r : rep2.rows) EXPECT_NEAR(r.band_hi, -r.band_lo, 1e-18);
    EXPECT_FALSE(rep2.buckets.empty());
}

TEST(Adversarial, SinglePathCannotLose) {
    auto data = testing_support::one_period({0.0005});
    CostSpec spec = marginal(0.001);
    const auto r = adversarial_test(data, {}, spec, Utility::exponential(1.0), testing_support::small_config(10));
    // Costs exceed the move, so the best trade is none (up to smoothing).
    EXPECT_GE(r.certainty_equivalent, -1e-9);
    EXPECT_EQ(r.pnl.size(), 1u);
}

TEST(Bounded, ZeroReturnsGiveUnitDensity) {
    const auto data = testing_support::one_period({0.0, 0.0, 0.0});
    const auto r = bounded_reweight(data, Utility::exponential(1.0), testing_support::small_config(5));
    for (double w : r.density.weights) EXPECT_NEAR(w, 1.0, 1e-12);
    for (double f : r.factors) EXPECT_EQ(f, 1.0);
    EXPECT_EQ(r.density.mode, DensityMode::Bounded);
}

TEST(Bounded, MartingaleOnUnscaledReturns) {
    const std::vector<double> x{0.5, -0.25, 0.1, -0.4, 0.3};
    const auto data = testing_support::one_period(x);
    const auto r = bounded_reweight(data, Utility::exponential(1.0), testing_support::small_config());
    EXPECT_NEAR(weighted_mean(x, r.density.weights), 0.0, 1e-6);
    const auto plain = density(make_problem(data, testing_support::no_cost(), Utility::exponential(1.0)),
                               train(make_problem(data, testing_support::no_cost(), Utility::exponential(1.0)),
                                     testing_support::small_config()));
    EXPECT_NEAR(weighted_mean(x, plain.weights), 0.0, 1e-6);
    // Scaled duality: E[u~((1 + M) D)] >= F-bar with equality at the optimum.
    const DivergenceResult dv = divergence(r.density.weights, Utility::exponential(1.0), r.factors);
    EXPECT_GE(dv.value, r.solution.objective_value - 1e-8);
}

TEST(Histogram, CountsAddUp) {
    const std::vector<double> v{0.0, 1.0, 2.0, 3.0}, w{1.0, 2.0, 3.0, 4.0};
    const auto h = make_histogram(v, w, 3);
    EXPECT_EQ(h.edges.size(), 4u);
    EXPECT_DOUBLE_EQ(std::accumulate(h.counts.begin(), h.counts.end(), 0.0), 10.0);
    EXPECT_DOUBLE_EQ(h.counts.back(), 7.0);  // the top edge closes the last bin
}
