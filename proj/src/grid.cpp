#include "driftless/grid.hpp"
#include "driftless/error.hpp"

#include <cmath>
#include <string>

namespace driftless {

std::size_t DlvGrid::atm_index() const {
    for (std::size_t i = 0; i < strikes.size(); ++i) {
        if (std::abs(strikes[i] - 1.0) < 1e-12) return i;
    }
    throw Error(ErrorKind::Validation, "grid has no strike at 1.0");
}

void DlvGrid::validate() const {
    if (strikes.empty() || maturities.empty()) {
        throw Error(ErrorKind::Validation, "grid needs at least one strike and one maturity");
    }
    for (std::size_t i = 0; i < strikes.size(); ++i) {
        if (!std::isfinite(strikes[i]) || (i > 0 && !(strikes[i] > strikes[i - 1]))) {
            throw Error(ErrorKind::Validation, "strikes must be finite and strictly increasing");
        }
    }
    if (!(boundary_lo >= 0.0 && boundary_lo < strikes.front())) {
        throw Error(ErrorKind::Validation, "boundary_lo must satisfy 0 <= x_0 < x_1");
    }
    if (!(boundary_hi > strikes.back()) || !std::isfinite(boundary_hi)) {
        throw Error(ErrorKind::Validation, "boundary_hi must exceed the largest strike");
    }
    for (std::size_t j = 0; j < maturities.size(); ++j) {
        const double prev = j == 0 ? 0.0 : maturities[j - 1];
        if (!std::isfinite(maturities[j]) || !(maturities[j] > prev)) {
            throw Error(ErrorKind::Validation, "maturities must be positive and strictly increasing");
        }
    }
}

DlvGrid make_grid(std::vector<double> strikes, std::vector<double> maturity_days, double boundary_lo,
                  double boundary_hi) {
    DlvGrid g;
    g.strikes = std::move(strikes);
    g.boundary_lo = boundary_lo;
    g.boundary_hi = boundary_hi > 0.0 ? boundary_hi : 1.0 + 2.0 * (g.strikes.empty() ? 1.0 : g.strikes.back());
    for (double d : maturity_days) g.maturities.push_back(d / kDaysPerYear);
    g.validate();
    return g;
}

}  // namespace driftless
