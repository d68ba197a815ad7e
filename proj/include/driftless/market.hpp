#pragma once

#include "driftless/dlv.hpp"
#include "driftless/grid.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace driftless {

inline constexpr double kSigmaFloor = 1e-6;

struct MarketState {
    std::size_t step_index = 0;
    double spot = 1.0;
    DlvSurface dlv;
    CallGrid call_prices;

    void validate() const;
};

struct InstrumentSpec {
    enum class Kind { Spot, Call, Put };

    Kind kind = Kind::Spot;
    double rel_strike = 1.0;  // unused for spot
    int ttm_days = 0;         // unused for spot

    static InstrumentSpec spot() { return {}; }
    static InstrumentSpec call(double k, int days) { return {Kind::Call, k, days}; }
    static InstrumentSpec put(double k, int days) { return {Kind::Put, k, days}; }

    std::string label() const;

    bool operator==(const InstrumentSpec&) const = default;
};

// Spot plus one call per (maturity, strike) node of the grid.
std::vector<InstrumentSpec> grid_instruments(const DlvGrid& grid);

/// Simulated market paths. States t = 0..n_steps are stored per path; each
/// state keeps its spot, its DLV nodes and the call grid derived from them.
struct PathBundle {
    DlvGrid grid;
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::vector<double> spot;    // n_paths * (n_steps + 1)
    std::vector<double> dlv;     // n_paths * (n_steps + 1) * n_nodes
    std::vector<double> prices;  // n_paths * (n_steps + 1) * (m + 1)(n + 2)
    std::optional<std::vector<double>> weights;
    std::uint64_t seed = 0;
    std::string provenance;

    std::size_t states_per_path() const noexcept { return n_steps + 1; }
    std::size_t state_index(std::size_t path, std::size_t step) const noexcept {
        return path * (n_steps + 1) + step;
    }
    std::size_t price_stride() const noexcept { return (grid.n_maturities() + 1) * (grid.n_strikes() + 2); }

    double spot_at(std::size_t path, std::size_t step) const { return spot[state_index(path, step)]; }
    std::span<const double> sigma_at(std::size_t path, std::size_t step) const {
        return {dlv.data() + state_index(path, step) * grid.n_nodes(), grid.n_nodes()};
    }
    std::span<const double> prices_at(std::size_t path, std::size_t step) const {
        return {prices.data() + state_index(path, step) * price_stride(), price_stride()};
    }

    MarketState state(std::size_t path, std::size_t step) const;

    // Per-path weights, uniform when none are stored.
    std::vector<double> weights_or_uniform() const;

    // Allocates storage for the given shape.
    void resize(std::size_t paths, std::size_t steps);

    // Rebuilds every state's call grid from its DLV nodes.
    void recompute_prices();

    void validate() const;
};

/// Per path, step and instrument: value at the horizon of the instrument
/// bought at t, minus its time-t mid. Also keeps the time-t mid and
/// Black-Scholes vega of each instrument, which the cost model needs.
struct InstrumentReturn {
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::size_t n_instruments = 0;
    std::vector<double> dh;
    std::vector<double> mid;
    std::vector<double> vega;

    std::size_t index(std::size_t path, std::size_t step, std::size_t instr) const noexcept {
        return (path * n_steps + step) * n_instruments + instr;
    }
    double at(std::size_t path, std::size_t step, std::size_t instr) const { return dh[index(path, step, instr)]; }
    std::size_t per_path() const noexcept { return n_steps * n_instruments; }
};

InstrumentReturn build_returns(const PathBundle& bundle, std::span<const InstrumentSpec> instruments);

/// Sum over steps of a_t . DH_t; actions share the layout of returns.dh.
std::vector<double> gains(const InstrumentReturn& returns, std::span<const double> actions);

/// Black-Scholes vega per unit notional at relative strike k, maturity tau.
double bs_vega(double k, double tau, double vol);

/// Black-Scholes call on unit spot, zero rates.
double bs_call(double k, double tau, double vol);

/// Inverse of bs_call in vol; 0 at intrinsic. Throws Domain for prices
/// outside [(1 - k)^+, 1).
double bs_implied_vol(double price, double k, double tau);

/// Black-Scholes implied vols of the interior lattice nodes, maturity-major.
std::vector<double> lattice_implied_vols(const DlvGrid& grid, std::span<const double> prices);

/// Mark of a call at relative strike x and maturity tau: per maturity row,
/// Black-Scholes at the implied vol interpolated linearly in strike between
/// interior nodes (flat outside), then total implied variance linear in
/// maturity between rows, zero at tau = 0. Reproduces the lattice prices at
/// the nodes. With Extrapolation::Error strikes outside [x_0, x_{n+1}] throw
/// GridDomain.
double mark_call(const DlvGrid& grid, std::span<const double> vols, double x, double tau,
                 Extrapolation mode = Extrapolation::Error);

/// [t/horizon, log S_t, log max(sigma, floor) for every node]
std::vector<double> features(const MarketState& state, std::size_t horizon);
std::size_t feature_length(const DlvGrid& grid);

/// Features of every trading state (t < n_steps), row (path * n_steps + t).
std::vector<double> feature_table(const PathBundle& bundle);

}  // namespace driftless
