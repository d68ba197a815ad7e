#include "driftless/dlv.hpp"
#include "driftless/error.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <string>

namespace driftless {

namespace {

constexpr double kZeroTol = 1e-14;

std::string node_name(std::size_t j, std::size_t i) {
    return "(j=" + std::to_string(j) + ", i=" + std::to_string(i) + ")";
}

// Value of row j at relative strike x; row is the (n+2)-wide price row.
double row_value(const DlvGrid& grid, const double* row, double x, Extrapolation mode) {
    const std::size_t last = grid.n_strikes() + 1;
    if (x < grid.boundary_lo || x > grid.boundary_hi) {
        if (mode == Extrapolation::Error) {
            throw Error(ErrorKind::GridDomain, "strike " + std::to_string(x) + " outside [" +
                                                   std::to_string(grid.boundary_lo) + ", " +
                                                   std::to_string(grid.boundary_hi) + "]");
        }
        // Deep in the money the call is intrinsic; beyond x_{n+1} it is worthless.
        return x < grid.boundary_lo ? row[0] + (grid.boundary_lo - x) : 0.0;
    }
    std::size_t hi = 1;
    while (hi < last && grid.node(hi) < x) ++hi;
    const std::size_t lo = hi - 1;
    const double x0 = grid.node(lo);
    const double x1 = grid.node(hi);
    const double w = (x - x0) / (x1 - x0);
    return (1.0 - w) * row[lo] + w * row[hi];
}

}  // namespace

DlvSurface::DlvSurface(DlvGrid g, std::vector<double> s) : grid(std::move(g)), sigma(std::move(s)) {
    if (sigma.size() != grid.n_nodes()) {
        throw Error(ErrorKind::Shape, "sigma has " + std::to_string(sigma.size()) + " entries, grid has " +
                                          std::to_string(grid.n_nodes()));
    }
    for (std::size_t k = 0; k < sigma.size(); ++k) {
        if (!std::isfinite(sigma[k]) || sigma[k] < 0.0) {
            throw Error(ErrorKind::InvalidSurface,
                        "sigma must be finite and non-negative at node " +
                            node_name(k / grid.n_strikes() + 1, k % grid.n_strikes() + 1));
        }
    }
}

std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                      std::span<const double> upper, std::span<const double> rhs) {
    const std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n) {
        throw Error(ErrorKind::Shape, "tridiagonal bands and rhs must have equal length");
    }
    std::vector<double> c(n), d(n), x(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double pivot = k == 0 ? diag[0] : diag[k] - lower[k] * c[k - 1];
        if (pivot == 0.0 || !std::isfinite(pivot)) {
            throw Error(ErrorKind::Singular, "zero pivot at row " + std::to_string(k));
        }
        c[k] = k + 1 < n ? upper[k] / pivot : 0.0;
        d[k] = (rhs[k] - (k == 0 ? 0.0 : lower[k] * d[k - 1])) / pivot;
    }
    for (std::size_t k = n; k-- > 0;) {
        x[k] = d[k] - (k + 1 < n ? c[k] * x[k + 1] : 0.0);
    }
    return x;
}

void prices_from_dlv(const DlvGrid& grid, std::span<const double> sigma, std::span<double> out) {
    const std::size_t n = grid.n_strikes();
    const std::size_t m = grid.n_maturities();
    const std::size_t cols = n + 2;
    if (sigma.size() != n * m || out.size() != (m + 1) * cols) {
        throw Error(ErrorKind::Shape, "prices_from_dlv buffer sizes do not match the grid");
    }
    for (std::size_t i = 0; i < cols; ++i) out[i] = std::max(1.0 - grid.node(i), 0.0);

    std::vector<double> lower(n), diag(n), upper(n), rhs(n);
    for (std::size_t j = 1; j <= m; ++j) {
        const double dtau = grid.tau(j) - grid.tau(j - 1);
        const double* prev = out.data() + (j - 1) * cols;
        double* row = out.data() + j * cols;
        row[0] = 1.0 - grid.boundary_lo;
        row[n + 1] = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
            const double x = grid.node(i);
            const double hm = x - grid.node(i - 1);
            const double hp = grid.node(i + 1) - x;
            const double s = sigma[(j - 1) * n + (i - 1)];
            const double alpha = 0.5 * x * x * s * s * dtau / (0.5 * (hm + hp));
            const std::size_t k = i - 1;
            lower[k] = -alpha / hm;
            upper[k] = -alpha / hp;
            diag[k] = 1.0 + alpha / hm + alpha / hp;
            rhs[k] = prev[i];
            if (i == 1) rhs[k] += alpha / hm * row[0];
            if (i == n) rhs[k] += alpha / hp * row[n + 1];
            if (!(diag[k] >= std::abs(lower[k]) + std::abs(upper[k]))) {
                throw Error(ErrorKind::Singular, "implicit step lost diagonal dominance at " + node_name(j, i));
            }
        }
        const auto sol = solve_tridiagonal(lower, diag, upper, rhs);
        std::copy(sol.begin(), sol.end(), row + 1);
    }
}

CallGrid prices_from_dlv(const DlvSurface& s) {
    CallGrid cg;
    cg.grid = s.grid;
    cg.prices.resize((s.grid.n_maturities() + 1) * (s.grid.n_strikes() + 2));
    prices_from_dlv(s.grid, s.sigma, cg.prices);
    return cg;
}

DlvSurface dlv_from_prices(const CallGrid& cg) {
    const DlvGrid& grid = cg.grid;
    const std::size_t n = grid.n_strikes();
    const std::size_t m = grid.n_maturities();
    if (cg.prices.size() != (m + 1) * (n + 2)) {
        throw Error(ErrorKind::Shape, "call grid size does not match its lattice");
    }
    for (double c : cg.prices) {
        if (!std::isfinite(c)) throw Error(ErrorKind::InvalidSurface, "non-finite call price");
    }
    std::vector<double> sigma(n * m);
    for (std::size_t j = 1; j <= m; ++j) {
        const double dtau = grid.tau(j) - grid.tau(j - 1);
        for (std::size_t i = 1; i <= n; ++i) {
            const double x = grid.node(i);
            const double hm = x - grid.node(i - 1);
            const double hp = grid.node(i + 1) - x;
            const double theta = (cg.at(j, i) - cg.at(j - 1, i)) / dtau;
            const double gamma =
                ((cg.at(j, i + 1) - cg.at(j, i)) / hp - (cg.at(j, i) - cg.at(j, i - 1)) / hm) / (0.5 * (hm + hp));
            if (theta < -kZeroTol) {
                throw Error(ErrorKind::Arbitrage, "calendar arbitrage (negative theta) at " + node_name(j, i));
            }
            if (gamma < -kZeroTol) {
                throw Error(ErrorKind::Arbitrage, "butterfly arbitrage (negative gamma) at " + node_name(j, i));
            }
            double s = 0.0;
            if (std::abs(theta) >= kZeroTol) {
                if (gamma <= kZeroTol) {
                    throw Error(ErrorKind::Arbitrage, "positive theta with zero gamma at " + node_name(j, i));
                }
                s = std::sqrt(2.0 * theta / (x * x * gamma));
            }
            sigma[(j - 1) * n + (i - 1)] = s;
        }
    }
    return DlvSurface(grid, std::move(sigma));
}

double interpolate_call(const DlvGrid& grid, std::span<const double> prices, double x, double tau,
                        Extrapolation mode) {
    const std::size_t m = grid.n_maturities();
    const std::size_t cols = grid.n_strikes() + 2;
    const double tau_max = grid.tau(m);
    if (tau < -1e-12 || tau > tau_max * (1.0 + 1e-12)) {
        throw Error(ErrorKind::GridDomain, "maturity " + std::to_string(tau * kDaysPerYear) +
                                               "d outside [0, " + std::to_string(tau_max * kDaysPerYear) + "d]");
    }
    tau = std::clamp(tau, 0.0, tau_max);
    std::size_t j = 1;
    while (j < m && grid.tau(j) < tau) ++j;
    const double t0 = grid.tau(j - 1);
    const double t1 = grid.tau(j);
    const double w = (tau - t0) / (t1 - t0);
    const double v0 = row_value(grid, prices.data() + (j - 1) * cols, x, mode);
    const double v1 = row_value(grid, prices.data() + j * cols, x, mode);
    return (1.0 - w) * v0 + w * v1;
}

CallGrid intrinsic_grid(const DlvGrid& grid) {
    CallGrid cg;
    cg.grid = grid;
    const std::size_t cols = grid.n_strikes() + 2;
    cg.prices.resize((grid.n_maturities() + 1) * cols);
    for (std::size_t j = 0; j <= grid.n_maturities(); ++j) {
        for (std::size_t i = 0; i < cols; ++i) cg.at(j, i) = std::max(1.0 - grid.node(i), 0.0);
    }
    return cg;
}

StaticArbitrageCheck check_static_arbitrage(const CallGrid& cg) {
    const DlvGrid& grid = cg.grid;
    const std::size_t n = grid.n_strikes();
    StaticArbitrageCheck out;
    out.min_gamma = out.min_theta = out.min_slope_gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= grid.n_maturities(); ++j) {
        for (std::size_t i = 0; i <= n; ++i) {
            const double delta = (cg.at(j, i + 1) - cg.at(j, i)) / (grid.node(i + 1) - grid.node(i));
            out.min_slope_gap = std::min({out.min_slope_gap, -delta, 1.0 + delta});
        }
        for (std::size_t i = 1; i <= n; ++i) {
            const double hm = grid.node(i) - grid.node(i - 1);
            const double hp = grid.node(i + 1) - grid.node(i);
            const double gamma = (cg.at(j, i + 1) - cg.at(j, i)) / hp - (cg.at(j, i) - cg.at(j, i - 1)) / hm;
            out.min_gamma = std::min(out.min_gamma, gamma);
            if (j > 0) out.min_theta = std::min(out.min_theta, cg.at(j, i) - cg.at(j - 1, i));
        }
    }
    return out;
}

}  // namespace driftless
