#pragma once

#include "driftless/grid.hpp"

#include <span>
#include <vector>

namespace driftless {

/// Discrete local volatility surface: one sigma per (maturity j, strike i),
/// stored maturity-major (j * n + i), j and i zero-based over the interior.
///
/// The defining identity on the lattice is
///
///     Theta^{j,i} = 1/2 x_i^2 (sigma^{j,i})^2 Gamma^{j,i}
///
/// with Theta the calendar difference quotient between consecutive
/// maturities and Gamma the second strike difference normalised by the local
/// strike spacing 1/2 (x_{i+1} - x_{i-1}), so sigma is a per-annum local vol.
struct DlvSurface {
    DlvGrid grid;
    std::vector<double> sigma;

    DlvSurface() = default;
    DlvSurface(DlvGrid g, std::vector<double> s);

    double at(std::size_t j, std::size_t i) const { return sigma[j * grid.n_strikes() + i]; }
};

/// Call prices C^{j,i} on the lattice, rows j = 0..m (row 0 is intrinsic),
/// columns i = 0..n+1 including both boundary strikes. Spot-relative units.
struct CallGrid {
    DlvGrid grid;
    std::vector<double> prices;

    std::size_t cols() const noexcept { return grid.n_strikes() + 2; }
    double at(std::size_t j, std::size_t i) const { return prices[j * cols() + i]; }
    double& at(std::size_t j, std::size_t i) { return prices[j * cols() + i]; }
};

/// Thomas algorithm for a tridiagonal system. lower[0] and upper[n-1] are
/// ignored. Throws Singular on a zero pivot.
std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                      std::span<const double> upper, std::span<const double> rhs);

/// Inverts the lattice identity node by node. Throws Arbitrage naming (j, i)
/// when a calendar or butterfly violation makes sigma imaginary.
DlvSurface dlv_from_prices(const CallGrid& cg);

/// Rebuilds call prices maturity by maturity by solving the implicit scheme.
CallGrid prices_from_dlv(const DlvSurface& s);

/// Same as prices_from_dlv but writes into a preallocated row-major buffer of
/// (m+1) x (n+2) prices; used in the simulator's inner loop.
void prices_from_dlv(const DlvGrid& grid, std::span<const double> sigma, std::span<double> out);

enum class Extrapolation { Error, Intrinsic };

/// Price of a call with relative strike x and maturity tau (years), linear in
/// strike between lattice nodes and linear in maturity between rows.
/// Outside [x_0, x_{n+1}] either throws GridDomain or extends with the
/// boundary behaviour (1 - x below x_0, zero above x_{n+1}).
double interpolate_call(const DlvGrid& grid, std::span<const double> prices, double x, double tau,
                        Extrapolation mode = Extrapolation::Error);

/// Intrinsic rows only: C^{j,i} = (1 - x_i)^+ for all j.
CallGrid intrinsic_grid(const DlvGrid& grid);

/// Largest butterfly / calendar violation (negative means violated).
struct StaticArbitrageCheck {
    double min_gamma = 0.0;
    double min_theta = 0.0;
    double min_slope_gap = 0.0;  // min over (-Delta) and (1 + Delta), monotone and bounded
};
StaticArbitrageCheck check_static_arbitrage(const CallGrid& cg);

}  // namespace driftless
