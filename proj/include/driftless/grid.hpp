#pragma once

#include <cstddef>
#include <vector>

namespace driftless {

inline constexpr double kDaysPerYear = 252.0;

// Relative-strike / maturity lattice shared by DLV surfaces and call grids.
// Strikes x_1 < ... < x_n are bracketed by boundary strikes x_0 and x_{n+1};
// maturities are in years with an implicit tau_0 = 0.
struct DlvGrid {
    std::vector<double> strikes;
    double boundary_lo = 0.0;
    double boundary_hi = 0.0;
    std::vector<double> maturities;

    std::size_t n_strikes() const noexcept { return strikes.size(); }
    std::size_t n_maturities() const noexcept { return maturities.size(); }
    std::size_t n_nodes() const noexcept { return strikes.size() * maturities.size(); }

    // Strike i in 0..n+1, boundaries included.
    double node(std::size_t i) const noexcept {
        if (i == 0) return boundary_lo;
        if (i == strikes.size() + 1) return boundary_hi;
        return strikes[i - 1];
    }

    // tau_j for j in 0..m, with tau_0 = 0.
    double tau(std::size_t j) const noexcept { return j == 0 ? 0.0 : maturities[j - 1]; }

    // Index of the strike equal to 1.0, if present.
    std::size_t atm_index() const;

    // Throws Validation on broken invariants.
    void validate() const;

    bool operator==(const DlvGrid&) const = default;
};

// Convenience: strikes plus maturities in business days; boundary_hi defaults
// to 1 + 2 x_n.
DlvGrid make_grid(std::vector<double> strikes, std::vector<double> maturity_days,
                  double boundary_lo, double boundary_hi = -1.0);

}  // namespace driftless
