#include "driftless/market.hpp"
#include "driftless/error.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace driftless {

void MarketState::validate() const {
    if (!(spot > 0.0) || !std::isfinite(spot)) {
        throw Error(ErrorKind::InvalidSurface, "spot must be positive and finite");
    }
    for (double s : dlv.sigma) {
        if (!std::isfinite(s) || s < 0.0) throw Error(ErrorKind::InvalidSurface, "DLV must be finite and >= 0");
    }
    for (double c : call_prices.prices) {
        if (!std::isfinite(c)) throw Error(ErrorKind::InvalidSurface, "non-finite call price");
    }
}

std::string InstrumentSpec::label() const {
    auto fmt = [](double v) {
        std::string s = std::to_string(v);
        s.erase(s.find_last_not_of('0') + 1);
        if (!s.empty() && s.back() == '.') s.pop_back();
        return s;
    };
    switch (kind) {
    case Kind::Spot: return "spot";
    case Kind::Call: return "call_" + fmt(rel_strike) + "_" + std::to_string(ttm_days) + "d";
    case Kind::Put: return "put_" + fmt(rel_strike) + "_" + std::to_string(ttm_days) + "d";
    }
    return "?";
}

std::vector<InstrumentSpec> grid_instruments(const DlvGrid& grid) {
    std::vector<InstrumentSpec> out{InstrumentSpec::spot()};
    for (double tau : grid.maturities) {
        const int days = static_cast<int>(std::lround(tau * kDaysPerYear));
        for (double k : grid.strikes) out.push_back(InstrumentSpec::call(k, days));
    }
    return out;
}

MarketState PathBundle::state(std::size_t path, std::size_t step) const {
    MarketState s;
    s.step_index = step;
    s.spot = spot_at(path, step);
    const auto sig = sigma_at(path, step);
    s.dlv = DlvSurface(grid, {sig.begin(), sig.end()});
    const auto pr = prices_at(path, step);
    s.call_prices.grid = grid;
    s.call_prices.prices.assign(pr.begin(), pr.end());
    return s;
}

std::vector<double> PathBundle::weights_or_uniform() const {
    if (weights) return *weights;
    return std::vector<double>(n_paths, 1.0);
}

void PathBundle::resize(std::size_t paths, std::size_t steps) {
    n_paths = paths;
    n_steps = steps;
    const std::size_t states = paths * (steps + 1);
    spot.assign(states, 1.0);
    dlv.assign(states * grid.n_nodes(), 0.0);
    prices.assign(states * price_stride(), 0.0);
}

void PathBundle::recompute_prices() {
    const std::size_t states = n_paths * (n_steps + 1);
    prices.resize(states * price_stride());
    for (std::size_t s = 0; s < states; ++s) {
        prices_from_dlv(grid, std::span<const double>(dlv.data() + s * grid.n_nodes(), grid.n_nodes()),
                        std::span<double>(prices.data() + s * price_stride(), price_stride()));
    }
}

void PathBundle::validate() const {
    grid.validate();
    const std::size_t states = n_paths * (n_steps + 1);
    if (n_paths == 0 || spot.size() != states || dlv.size() != states * grid.n_nodes() ||
        prices.size() != states * price_stride()) {
        throw Error(ErrorKind::Shape, "path bundle arrays do not match n_paths x (n_steps + 1)");
    }
    for (double s : spot) {
        if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorKind::InvalidSurface, "spot must be positive");
    }
    for (double s : dlv) {
        if (!std::isfinite(s) || s < 0.0) throw Error(ErrorKind::InvalidSurface, "DLV must be finite and >= 0");
    }
    for (std::size_t p = 1; p < n_paths; ++p) {
        const auto a = sigma_at(0, 0);
        const auto b = sigma_at(p, 0);
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (std::abs(a[k] - b[k]) > 1e-12 * std::max(1.0, std::abs(a[k]))) {
                throw Error(ErrorKind::Validation, "initial DLV differs between paths 0 and " + std::to_string(p));
            }
        }
    }
    if (weights) {
        if (weights->size() != n_paths) throw Error(ErrorKind::Shape, "one weight per path required");
        double sum = 0.0;
        for (double w : *weights) {
            if (!(w > 0.0) || !std::isfinite(w)) throw Error(ErrorKind::Validation, "weights must be positive");
            sum += w;
        }
        if (std::abs(sum / static_cast<double>(n_paths) - 1.0) > 1e-9) {
            throw Error(ErrorKind::Validation, "weights must have mean 1");
        }
    }
}

double bs_vega(double k, double tau, double vol) {
    const double sd = vol * std::sqrt(tau);
    if (!(tau > 0.0)) return 0.0;
    if (sd < 1e-12) return std::abs(k - 1.0) < 1e-12 ? std::sqrt(tau) / std::sqrt(2.0 * std::numbers::pi) : 0.0;
    const double d1 = (-std::log(k) + 0.5 * sd * sd) / sd;
    return std::sqrt(tau) * std::exp(-0.5 * d1 * d1) / std::sqrt(2.0 * std::numbers::pi);
}

double bs_call(double k, double tau, double vol) {
    const double sd = vol * std::sqrt(tau);
    if (!(sd > 1e-14)) return std::max(1.0 - k, 0.0);
    const double d1 = (-std::log(k) + 0.5 * sd * sd) / sd;
    const double d2 = d1 - sd;
    return 0.5 * std::erfc(-d1 / std::sqrt(2.0)) - k * 0.5 * std::erfc(-d2 / std::sqrt(2.0));
}

double bs_implied_vol(double price, double k, double tau) {
    const double intrinsic = std::max(1.0 - k, 0.0);
    if (!(tau > 0.0) || price <= intrinsic + 1e-15) {
        if (price < intrinsic - 1e-12) throw Error(ErrorKind::Domain, "call price below intrinsic value");
        return 0.0;
    }
    if (!(price < 1.0)) throw Error(ErrorKind::Domain, "call price not below spot");
    double lo = 0.0, hi = 1.0;
    while (bs_call(k, tau, hi) < price) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e4) throw Error(ErrorKind::Domain, "implied vol does not converge");
    }
    double v = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = bs_call(k, tau, v) - price;
        if (f == 0.0) break;
        if (f > 0.0) hi = v; else lo = v;
        const double vega = bs_vega(k, tau, v);
        double next = vega > 1e-300 ? v - f / vega : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - v) <= 1e-15 * v || hi - lo <= 1e-15 * hi) {
            v = next;
            break;
        }
        v = next;
    }
    return v;
}

std::vector<double> lattice_implied_vols(const DlvGrid& grid, std::span<const double> prices) {
    const std::size_t n = grid.n_strikes();
    const std::size_t cols = n + 2;
    std::vector<double> vols(grid.n_nodes());
    for (std::size_t j = 0; j < grid.n_maturities(); ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            vols[j * n + i] = bs_implied_vol(prices[(j + 1) * cols + i + 1], grid.strikes[i], grid.maturities[j]);
        }
    }
    return vols;
}

double mark_call(const DlvGrid& grid, std::span<const double> vols, double x, double tau, Extrapolation mode) {
    if (x < grid.boundary_lo || x > grid.boundary_hi) {
        if (mode == Extrapolation::Error) {
            throw Error(ErrorKind::GridDomain, "strike " + std::to_string(x) + " outside [" +
                                                   std::to_string(grid.boundary_lo) + ", " +
                                                   std::to_string(grid.boundary_hi) + "]");
        }
    }
    if (!(x > 0.0)) return 1.0 - x;
    const std::size_t m = grid.n_maturities();
    const std::size_t n = grid.n_strikes();
    const double tau_max = grid.tau(m);
    if (tau < -1e-12 || tau > tau_max * (1.0 + 1e-12)) {
        throw Error(ErrorKind::GridDomain, "maturity " + std::to_string(tau * kDaysPerYear) + "d outside [0, " +
                                               std::to_string(tau_max * kDaysPerYear) + "d]");
    }
    tau = std::clamp(tau, 0.0, tau_max);
    // Implied vol in strike, then total variance linear in maturity from
    // zero at tau = 0.
    auto row_vol = [&](std::size_t j) {
        const double* v = vols.data() + (j - 1) * n;
        if (x <= grid.strikes.front()) return v[0];
        if (x >= grid.strikes.back()) return v[n - 1];
        std::size_t hi = 1;
        while (grid.strikes[hi] < x) ++hi;
        const double w = (x - grid.strikes[hi - 1]) / (grid.strikes[hi] - grid.strikes[hi - 1]);
        return (1.0 - w) * v[hi - 1] + w * v[hi];
    };
    if (!(tau > 0.0)) return std::max(1.0 - x, 0.0);
    std::size_t j = 1;
    while (j < m && grid.tau(j) < tau) ++j;
    const double hi_var = row_vol(j) * row_vol(j) * grid.tau(j);
    const double lo_var = j == 1 ? 0.0 : row_vol(j - 1) * row_vol(j - 1) * grid.tau(j - 1);
    const double w = (tau - grid.tau(j - 1)) / (grid.tau(j) - grid.tau(j - 1));
    const double total_var = std::max((1.0 - w) * lo_var + w * hi_var, 0.0);
    return bs_call(x, tau, std::sqrt(total_var / tau));
}

namespace {

// ATM DLV at maturity tau, linear in tau between grid maturities and flat
// outside them.
double atm_vol(const DlvGrid& grid, std::span<const double> sigma, std::size_t atm, double tau) {
    const std::size_t n = grid.n_strikes();
    const std::size_t m = grid.n_maturities();
    if (tau <= grid.maturities.front()) return sigma[atm];
    if (tau >= grid.maturities.back()) return sigma[(m - 1) * n + atm];
    std::size_t j = 1;
    while (grid.maturities[j] < tau) ++j;
    const double w = (tau - grid.maturities[j - 1]) / (grid.maturities[j] - grid.maturities[j - 1]);
    return (1.0 - w) * sigma[(j - 1) * n + atm] + w * sigma[j * n + atm];
}

}  // namespace

InstrumentReturn build_returns(const PathBundle& bundle, std::span<const InstrumentSpec> instruments) {
    const DlvGrid& grid = bundle.grid;
    const std::size_t T = bundle.n_steps;
    InstrumentReturn r;
    r.n_paths = bundle.n_paths;
    r.n_steps = T;
    r.n_instruments = instruments.size();
    r.dh.resize(r.n_paths * T * r.n_instruments);
    r.mid.resize(r.dh.size());
    r.vega.resize(r.dh.size());

    std::size_t atm = 0;
    bool has_atm = true;
    try {
        atm = grid.atm_index();
    } catch (const Error&) {
        has_atm = false;
    }

    for (const auto& ins : instruments) {
        if (ins.kind == InstrumentSpec::Kind::Spot) continue;
        if (!(ins.rel_strike > 0.0) || ins.ttm_days <= 0) {
            throw Error(ErrorKind::Validation, "option " + ins.label() + " needs positive strike and maturity");
        }
        if (ins.rel_strike < grid.boundary_lo || ins.rel_strike > grid.boundary_hi) {
            throw Error(ErrorKind::GridDomain, "strike of " + ins.label() + " outside the grid span");
        }
        if (ins.ttm_days / kDaysPerYear > grid.maturities.back() * (1.0 + 1e-12)) {
            throw Error(ErrorKind::GridDomain, "maturity of " + ins.label() + " beyond the grid");
        }
    }

    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        const double s_end = bundle.spot_at(p, T);
        const auto end_prices = bundle.prices_at(p, T);
        for (double c : end_prices) {
            if (!std::isfinite(c)) throw Error(ErrorKind::InvalidSurface, "non-finite call price at the horizon");
        }
        const auto end_vols = lattice_implied_vols(grid, end_prices);
        for (std::size_t t = 0; t < T; ++t) {
            const double s_t = bundle.spot_at(p, t);
            const auto vols = lattice_implied_vols(grid, bundle.prices_at(p, t));
            const auto sigma = bundle.sigma_at(p, t);
            for (std::size_t i = 0; i < instruments.size(); ++i) {
                const auto& ins = instruments[i];
                const std::size_t idx = r.index(p, t, i);
                if (ins.kind == InstrumentSpec::Kind::Spot) {
                    r.mid[idx] = s_t;
                    r.vega[idx] = 0.0;
                    r.dh[idx] = s_end - s_t;
                    continue;
                }
                const bool is_put = ins.kind == InstrumentSpec::Kind::Put;
                const double k = ins.rel_strike;
                const double tau = ins.ttm_days / kDaysPerYear;
                const double call_t = mark_call(grid, vols, k, tau);
                if (!std::isfinite(call_t)) throw Error(ErrorKind::InvalidSurface, "non-finite mid price");
                const double mid = s_t * (is_put ? call_t - (1.0 - k) : call_t);

                double value;
                const std::size_t expiry = t + static_cast<std::size_t>(ins.ttm_days);
                if (expiry <= T) {
                    const double ratio = bundle.spot_at(p, expiry) / s_t;
                    value = s_t * (is_put ? std::max(k - ratio, 0.0) : std::max(ratio - k, 0.0));
                } else {
                    // Still alive at the horizon: mark off the final surface at
                    // the strike re-expressed relative to the final spot.
                    const double x = k * s_t / s_end;
                    const double remaining = static_cast<double>(expiry - T) / kDaysPerYear;
                    const double call_T = mark_call(grid, end_vols, x, remaining, Extrapolation::Intrinsic);
                    value = s_end * (is_put ? call_T - (1.0 - x) : call_T);
                }
                r.mid[idx] = mid;
                r.dh[idx] = value - mid;
                r.vega[idx] = has_atm ? s_t * bs_vega(k, tau, atm_vol(grid, sigma, atm, tau)) : 0.0;
            }
        }
    }
    return r;
}

std::vector<double> gains(const InstrumentReturn& returns, std::span<const double> actions) {
    if (actions.size() != returns.dh.size()) {
        throw Error(ErrorKind::Shape, "actions have " + std::to_string(actions.size()) + " entries, returns have " +
                                          std::to_string(returns.dh.size()));
    }
    const std::size_t per = returns.per_path();
    std::vector<double> g(returns.n_paths, 0.0);
    for (std::size_t p = 0; p < returns.n_paths; ++p) {
        double acc = 0.0;
        for (std::size_t k = 0; k < per; ++k) acc += actions[p * per + k] * returns.dh[p * per + k];
        g[p] = acc;
    }
    return g;
}

std::size_t feature_length(const DlvGrid& grid) { return 2 + grid.n_nodes(); }

std::vector<double> features(const MarketState& state, std::size_t horizon) {
    std::vector<double> f;
    f.reserve(2 + state.dlv.sigma.size());
    f.push_back(static_cast<double>(state.step_index) / static_cast<double>(horizon));
    f.push_back(std::log(state.spot));
    for (double s : state.dlv.sigma) f.push_back(std::log(std::max(s, kSigmaFloor)));
    return f;
}

std::vector<double> feature_table(const PathBundle& bundle) {
    const std::size_t width = feature_length(bundle.grid);
    std::vector<double> out(bundle.n_paths * bundle.n_steps * width);
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        const double s0 = bundle.spot_at(p, 0);
        for (std::size_t t = 0; t < bundle.n_steps; ++t) {
            double* row = out.data() + (p * bundle.n_steps + t) * width;
            row[0] = static_cast<double>(t) / static_cast<double>(bundle.n_steps);
            row[1] = std::log(bundle.spot_at(p, t) / s0);
            const auto sig = bundle.sigma_at(p, t);
            for (std::size_t k = 0; k < sig.size(); ++k) row[2 + k] = std::log(std::max(sig[k], kSigmaFloor));
        }
    }
    return out;
}

}  // namespace driftless
