#include "driftless/dlv.hpp"
#include "driftless/error.hpp"
#include "driftless/market.hpp"
#include "driftless/rng.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace driftless;

namespace {

DlvGrid test_grid() { return make_grid({0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15}, {20, 40, 60}, 0.5, 1.45); }

// Dense oracle: each maturity row solves the full (n+2)-square system
// C - dtau * 1/2 x^2 sigma^2 Gamma(C) = C_prev with boundary rows pinned.
std::vector<double> dense_prices(const DlvGrid& g, const std::vector<double>& sigma) {
    const std::size_t n = g.n_strikes(), m = g.n_maturities(), cols = n + 2;
    std::vector<double> out((m + 1) * cols);
    Eigen::VectorXd prev(cols);
    for (std::size_t i = 0; i < cols; ++i) prev(i) = std::max(1.0 - g.node(i), 0.0);
    for (std::size_t i = 0; i < cols; ++i) out[i] = prev(i);
    for (std::size_t j = 1; j <= m; ++j) {
        const double dtau = g.tau(j) - g.tau(j - 1);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(cols, cols);
        Eigen::VectorXd rhs(cols);
        a(0, 0) = 1.0;
        rhs(0) = 1.0 - g.boundary_lo;
        a(cols - 1, cols - 1) = 1.0;
        rhs(cols - 1) = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
            const double x = g.node(i), hm = x - g.node(i - 1), hp = g.node(i + 1) - x;
            const double s = sigma[(j - 1) * n + i - 1];
            const double k = dtau * 0.5 * x * x * s * s / (0.5 * (hm + hp));
            a(i, i) = 1.0 + k / hp + k / hm;
            a(i, i + 1) = -k / hp;
            a(i, i - 1) = -k / hm;
            rhs(i) = prev(i);
        }
        prev = a.fullPivLu().solve(rhs);
        for (std::size_t i = 0; i < cols; ++i) out[j * cols + i] = prev(i);
    }
    return out;
}

std::vector<double> random_surface(const DlvGrid& g, std::uint64_t seed) {
    UniformStream u(seed, 0, 0, 0);
    std::vector<double> s(g.n_nodes());
    for (double& v : s) v = 0.05 + 0.75 * u();
    return s;
}

}  // namespace

TEST(Tridiagonal, ThreeByThreeMatchesDenseSolve) {
    const std::vector<double> lo{0, 1, 1}, d{4, 4, 4}, up{1, 1, 0}, rhs{5, 6, 5};
    const auto x = solve_tridiagonal(lo, d, up, rhs);
    Eigen::Matrix3d a;
    a << 4, 1, 0, 1, 4, 1, 0, 1, 4;
    const Eigen::Vector3d ref = a.fullPivLu().solve(Eigen::Vector3d(5, 6, 5));
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(x[k], ref(k), 1e-14);
}

TEST(Tridiagonal, DiagonallyDominantAgreesWithDense) {
    for (std::size_t n : {50u, 200u}) {
        UniformStream u(n, 1, 0, 0);
        std::vector<double> lo(n), d(n), up(n), rhs(n);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd b(n);
        for (std::size_t k = 0; k < n; ++k) {
            lo[k] = k ? u() - 0.5 : 0.0;
            up[k] = k + 1 < n ? u() - 0.5 : 0.0;
            d[k] = 1.0 + std::abs(lo[k]) + std::abs(up[k]) + u();
            rhs[k] = u() - 0.5;
            a(k, k) = d[k];
            if (k) a(k, k - 1) = lo[k];
            if (k + 1 < n) a(k, k + 1) = up[k];
            b(k) = rhs[k];
        }
        const auto x = solve_tridiagonal(lo, d, up, rhs);
        const Eigen::VectorXd ref = a.fullPivLu().solve(b);
        const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
        EXPECT_LT((a * xv - b).lpNorm<Eigen::Infinity>(), 1e-10);
        EXPECT_LT((xv - ref).norm() / ref.norm(), 1e-12);
    }
}

TEST(Tridiagonal, ZeroPivotIsSingular) {
    const std::vector<double> lo{0, 1}, d{0, 1}, up{1, 0}, rhs{1, 1};
    try {
        solve_tridiagonal(lo, d, up, rhs);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Singular);
    }
}

TEST(PricesFromDlv, FlatSurfaceMatchesDenseOracle) {
    const DlvGrid g = test_grid();
    const std::vector<double> sigma(g.n_nodes(), 0.2);
    const CallGrid cg = prices_from_dlv(DlvSurface(g, sigma));
    const auto ref = dense_prices(g, sigma);
    ASSERT_EQ(cg.prices.size(), ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(cg.prices[k], ref[k], 1e-12) << k;
}

TEST(PricesFromDlv, RandomSurfacesMatchDenseOracle) {
    const DlvGrid g = test_grid();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto sigma = random_surface(g, seed);
        const CallGrid cg = prices_from_dlv(DlvSurface(g, sigma));
        const auto ref = dense_prices(g, sigma);
        for (std::size_t k = 0; k < ref.size(); ++k) ASSERT_NEAR(cg.prices[k], ref[k], 1e-12);
    }
}

TEST(PricesFromDlv, ZeroVolIsIntrinsic) {
    const DlvGrid g = test_grid();
    const CallGrid cg = prices_from_dlv(DlvSurface(g, std::vector<double>(g.n_nodes(), 0.0)));
    const CallGrid in = intrinsic_grid(g);
    for (std::size_t k = 0; k < cg.prices.size(); ++k) EXPECT_DOUBLE_EQ(cg.prices[k], in.prices[k]);
    const DlvSurface back = dlv_from_prices(cg);
    for (double s : back.sigma) EXPECT_EQ(s, 0.0);
}

TEST(PricesFromDlv, AtmPriceCloseToBlackScholes) {
    // Fine lattice, flat vol: the implicit scheme converges to Black-Scholes
    // at first order in the daily step.
    std::vector<double> strikes;
    for (int k = -40; k <= 40; ++k) strikes.push_back(1.0 + 0.01 * k);
    std::vector<double> days;
    for (int d = 1; d <= 60; ++d) days.push_back(d);
    const DlvGrid g = make_grid(strikes, days, 0.3, 2.0);
    const CallGrid cg = prices_from_dlv(DlvSurface(g, std::vector<double>(g.n_nodes(), 0.2)));
    const double bs = bs_call(1.0, 60.0 / kDaysPerYear, 0.2);
    EXPECT_NEAR(cg.at(60, 41), bs, 5e-3 * bs);
}

TEST(DlvRoundTrip, SigmaToPricesToSigma) {
    const DlvGrid g = test_grid();
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto sigma = random_surface(g, seed);
        const DlvSurface back = dlv_from_prices(prices_from_dlv(DlvSurface(g, sigma)));
        for (std::size_t k = 0; k < sigma.size(); ++k) ASSERT_NEAR(back.sigma[k], sigma[k], 1e-9);
    }
}

TEST(DlvRoundTrip, PricesToSigmaToPrices) {
    const DlvGrid g = test_grid();
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const CallGrid cg = prices_from_dlv(DlvSurface(g, random_surface(g, seed)));
        const CallGrid again = prices_from_dlv(dlv_from_prices(cg));
        for (std::size_t k = 0; k < cg.prices.size(); ++k) ASSERT_NEAR(again.prices[k], cg.prices[k], 1e-9);
    }
}

TEST(DlvRoundTrip, ReconstructedGridsAreArbitrageFree) {
    const DlvGrid g = test_grid();
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto chk = check_static_arbitrage(prices_from_dlv(DlvSurface(g, random_surface(g, seed))));
        ASSERT_GE(chk.min_gamma, -1e-12);
        ASSERT_GE(chk.min_theta, -1e-12);
        ASSERT_GE(chk.min_slope_gap, -1e-12);
    }
}

TEST(DlvFromPrices, CalendarViolationNamesNode) {
    const DlvGrid g = test_grid();
    CallGrid cg = prices_from_dlv(DlvSurface(g, std::vector<double>(g.n_nodes(), 0.2)));
    // Row 2 keeps 90% of the time value of row 1: still convex, but cheaper.
    const CallGrid in = intrinsic_grid(g);
    for (std::size_t i = 1; i <= g.strikes.size(); ++i) cg.at(2, i) = in.at(2, i) + 0.9 * (cg.at(1, i) - in.at(1, i));
    try {
        dlv_from_prices(cg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Arbitrage);
        EXPECT_NE(std::string(e.what()).find("calendar"), std::string::npos) << e.what();
    }
}

TEST(DlvFromPrices, ButterflyViolationIsArbitrage) {
    const DlvGrid g = test_grid();
    CallGrid cg = prices_from_dlv(DlvSurface(g, std::vector<double>(g.n_nodes(), 0.2)));
    cg.at(3, 4) += 0.05;
    cg.at(3, 3) += 0.05 * 2.0;  // keep theta positive at (3, 4), break convexity at (3, 3)/(3, 4)
    EXPECT_THROW(dlv_from_prices(cg), Error);
}

TEST(DlvSurface, RejectsNegativeAndNonFinite) {
    const DlvGrid g = test_grid();
    std::vector<double> s(g.n_nodes(), 0.2);
    s[3] = -0.1;
    EXPECT_THROW(DlvSurface(g, s), Error);
    s[3] = std::nan("");
    EXPECT_THROW(DlvSurface(g, s), Error);
    EXPECT_THROW(DlvSurface(g, std::vector<double>(3, 0.2)), Error);
}

TEST(DlvProperties, CalendarMonotoneOnRandomSurfaces) {
    const DlvGrid g = test_grid();
    for (std::uint64_t seed = 200; seed < 300; ++seed) {
        const CallGrid cg = prices_from_dlv(DlvSurface(g, random_surface(g, seed)));
        for (std::size_t j = 1; j <= g.n_maturities(); ++j) {
            for (std::size_t i = 0; i < cg.cols(); ++i) ASSERT_GE(cg.at(j, i), cg.at(j - 1, i) - 1e-12);
        }
    }
}

TEST(InterpolateCall, NodesLinearAndDomain) {
    const DlvGrid g = test_grid();
    const CallGrid cg = prices_from_dlv(DlvSurface(g, std::vector<double>(g.n_nodes(), 0.2)));
    EXPECT_DOUBLE_EQ(interpolate_call(g, cg.prices, 1.0, g.tau(2)), cg.at(2, 4));
    const double mid = interpolate_call(g, cg.prices, 1.025, 0.5 * (g.tau(1) + g.tau(2)));
    const double ref = 0.25 * (cg.at(1, 4) + cg.at(1, 5) + cg.at(2, 4) + cg.at(2, 5));
    EXPECT_NEAR(mid, ref, 1e-15);
    EXPECT_THROW(interpolate_call(g, cg.prices, 0.2, g.tau(1)), Error);
    EXPECT_NEAR(interpolate_call(g, cg.prices, 0.2, g.tau(1), Extrapolation::Intrinsic), 0.8, 1e-15);
    EXPECT_EQ(interpolate_call(g, cg.prices, 3.0, g.tau(1), Extrapolation::Intrinsic), 0.0);
}
