#include "driftless/error.hpp"
#include "driftless/parallel.hpp"
#include "driftless/var_model.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace driftless;

namespace {

// Noise-free oscillating VAR(2) in two dimensions, eigenvalues of modulus
// about 0.98 so the orbit keeps exciting every regressor.
VarParams rotating_var() {
    VarParams p;
    p.dim = 2;
    p.dt = 0.5;
    Eigen::Matrix2d phi1, phi2;
    phi1 << 1.0, 0.1, -0.05, 0.3;
    phi2 << -0.96, 0.02, 0.0, -0.96;
    p.a1 = -phi1 / p.dt;
    p.a2 = -phi2 / p.dt;
    p.b = Eigen::Vector2d(0.3, -0.1);
    p.chol = Eigen::Matrix2d::Zero();
    return p;
}

}  // namespace

TEST(FitVar, NoiselessRecoveryIsExact) {
    const VarParams truth = rotating_var();
    const Eigen::MatrixXd h = simulate_history(truth, Eigen::Vector2d(1.0, -0.5), Eigen::Vector2d(-0.3, 0.8), 200, 1);
    const VarFit fit = fit_var(h, truth.dt);
    EXPECT_LT((fit.params.a1 - truth.a1).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((fit.params.a2 - truth.a2).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((fit.params.b - truth.b).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FitVar, ConstantHistoryIsRankDeficient) {
    const Eigen::MatrixXd h = Eigen::MatrixXd::Constant(100, 3, 0.7);
    try {
        fit_var(h, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Fit);
    }
}

TEST(FitVar, ShortOrNonFiniteHistoryRejected) {
    EXPECT_THROW(fit_var(Eigen::MatrixXd::Random(20, 2), 1.0), Error);
    Eigen::MatrixXd h = Eigen::MatrixXd::Random(100, 2);
    h(5, 1) = std::nan("");
    EXPECT_THROW(fit_var(h, 1.0), Error);
}

TEST(FitVar, CoefficientsWithinThreeStandardErrors) {
    // d = 4, N = 10^4: coverage of the 3-SE interval over many seeds.
    const std::size_t d = 4;
    const VarParams truth = testing_support::random_var(d, 17);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
    std::size_t inside = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const Eigen::MatrixXd h = simulate_history(truth, zero, zero, 10000, seed);
        const VarFit fit = fit_var(h, truth.dt);
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d); ++i) {
            inside += std::abs(fit.params.b(i) - truth.b(i)) <= 3 * fit.se_b(i);
            ++total;
            for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
                inside += std::abs(fit.params.a1(i, j) - truth.a1(i, j)) <= 3 * fit.se_a1(i, j);
                inside += std::abs(fit.params.a2(i, j) - truth.a2(i, j)) <= 3 * fit.se_a2(i, j);
                total += 2;
            }
        }
    }
    EXPECT_GE(static_cast<double>(inside) / static_cast<double>(total), 0.99);
}

TEST(Simulate, NoiseMomentsMatchCovariance) {
    const std::size_t d = 3;
    VarParams p = testing_support::random_var(d, 5);
    p.dt = 0.25;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
    const std::size_t n = 100000;
    const Eigen::MatrixXd h = simulate_history(p, zero, zero, n, 2);
    Eigen::MatrixXd e(n, d);
    Eigen::VectorXd prev2 = zero, prev = zero;
    for (std::size_t r = 0; r < n; ++r) {
        const Eigen::VectorXd y = h.row(r).transpose();
        e.row(r) = (y - (p.b - p.a1 * prev - p.a2 * prev2) * p.dt).transpose();
        prev2 = prev;
        prev = y;
    }
    const Eigen::MatrixXd sigma = p.chol * p.chol.transpose() * p.dt;
    const Eigen::VectorXd mean = e.colwise().mean();
    const Eigen::MatrixXd cov = e.transpose() * e / static_cast<double>(n);
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < d; ++i) {
        EXPECT_LT(std::abs(mean(i)), 4 * std::sqrt(sigma(i, i) / nn));
        for (std::size_t j = 0; j < d; ++j) {
            const double se = std::sqrt((sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / nn);
            EXPECT_LT(std::abs(cov(i, j) - sigma(i, j)), 4 * se) << i << "," << j;
        }
    }
}

TEST(Simulate, FitRecoversSimulatedParams) {
    // A long history from fitted parameters: re-fit within 3 SE for >= 95%.
    const std::size_t d = 3;
    const VarParams truth = testing_support::random_var(d, 23);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
    const VarFit fit = fit_var(simulate_history(truth, zero, zero, 100000, 8), 1.0);
    std::size_t inside = 0, total = 0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d); ++i) {
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
            inside += std::abs(fit.params.a1(i, j) - truth.a1(i, j)) <= 3 * fit.se_a1(i, j);
            inside += std::abs(fit.params.a2(i, j) - truth.a2(i, j)) <= 3 * fit.se_a2(i, j);
            total += 2;
        }
    }
    EXPECT_GE(static_cast<double>(inside), 0.95 * static_cast<double>(total));
    EXPECT_LT((fit.params.chol - truth.chol).cwiseAbs().maxCoeff(), 0.01);
}

TEST(Simulate, DeterministicAndThreadIndependent) {
    const DlvGrid g = make_grid({0.95, 1.0, 1.05}, {20, 40, 60}, 0.5);
    const auto mk = synthetic_market(g, 0.3);
    const PathBundle a = simulate(mk.params, g, mk.init_prev, mk.init, 64, 5, 9);
    set_thread_count(3);
    const PathBundle b = simulate(mk.params, g, mk.init_prev, mk.init, 64, 5, 9);
    set_thread_count(1);
    EXPECT_EQ(a.spot, b.spot);
    EXPECT_EQ(a.dlv, b.dlv);
    EXPECT_EQ(a.prices, b.prices);
    const PathBundle c = simulate(mk.params, g, mk.init_prev, mk.init, 64, 5, 10);
    EXPECT_NE(a.spot, c.spot);
}

TEST(Simulate, ZeroNoiseIsTheDeterministicRecursion) {
    const DlvGrid g = make_grid({0.95, 1.0, 1.05}, {20, 40, 60}, 0.5);
    auto mk = synthetic_market(g, 0.3);
    mk.params.chol.setZero();
    mk.init(1) += 0.1;
    const PathBundle a = simulate(mk.params, g, mk.init_prev, mk.init, 3, 6, 1);
    const PathBundle b = simulate(mk.params, g, mk.init_prev, mk.init, 3, 6, 2);
    EXPECT_EQ(a.spot, b.spot);
    EXPECT_EQ(a.dlv, b.dlv);
    Eigen::VectorXd prev2 = mk.init_prev, prev = mk.init;
    double log_s = 0.0;
    for (std::size_t t = 1; t <= 6; ++t) {
        const Eigen::VectorXd next = (mk.params.b - mk.params.a1 * prev - mk.params.a2 * prev2) * mk.params.dt;
        log_s += next(0);
        EXPECT_NEAR(a.spot_at(2, t), std::exp(log_s), 1e-14);
        EXPECT_NEAR(a.sigma_at(2, t)[0], std::exp(next(1)), 1e-14);
        prev2 = prev;
        prev = next;
    }
}

TEST(Simulate, StatesAreArbitrageFree) {
    const DlvGrid g = make_grid({0.95, 1.0, 1.05}, {20, 40, 60}, 0.5);
    const auto mk = synthetic_market(g, 0.3);
    const PathBundle b = simulate(mk.params, g, mk.init_prev, mk.init, 50, 10, 4);
    EXPECT_NO_THROW(b.validate());
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        for (std::size_t t = 0; t <= b.n_steps; ++t) {
            const auto pr = b.prices_at(p, t);
            const auto chk = check_static_arbitrage(CallGrid{g, {pr.begin(), pr.end()}});
            ASSERT_GE(chk.min_gamma, -1e-12);
            ASSERT_GE(chk.min_theta, -1e-12);
        }
    }
}

TEST(Simulate, ExplodingVolsExhaustRetries) {
    const DlvGrid g = make_grid({0.95, 1.0, 1.05}, {20, 40, 60}, 0.5);
    auto mk = synthetic_market(g, 0.3);
    mk.init.tail(9).setConstant(std::log(4.9));
    mk.init_prev = mk.init;
    SimulationOptions opt;
    opt.sigma_max = 5.0;
    opt.max_retries = 3;
    mk.params.b.tail(9).setConstant(100.0);
    try {
        simulate(mk.params, g, mk.init_prev, mk.init, 2, 3, 1, opt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Simulation);
    }
}

TEST(Simulate, ShapeMismatch) {
    const DlvGrid g = make_grid({0.95, 1.0, 1.05}, {20, 40, 60}, 0.5);
    const auto mk = synthetic_market(g, 0.3);
    const DlvGrid other = make_grid({1.0}, {20}, 0.5);
    EXPECT_THROW(simulate(mk.params, other, mk.init_prev, mk.init, 2, 2, 1), Error);
}
