#pragma once

#include "driftless/market.hpp"

#include <optional>
#include <span>
#include <vector>

namespace driftless {

enum class CostMode { None, Marginal, Full };

const char* to_string(CostMode mode) noexcept;
CostMode cost_mode_from_string(const std::string& s);

/// Proportional cost on traded mid notional, optionally with a per-step vega
/// limit. gamma holds one rate per instrument, or a single rate broadcast to
/// all instruments.
struct CostSpec {
    std::vector<double> gamma{0.0};
    std::optional<double> vega_cap;
    CostMode mode = CostMode::Marginal;

    double rate(std::size_t instrument) const { return gamma.size() == 1 ? gamma[0] : gamma.at(instrument); }
    void validate(std::size_t n_instruments) const;
};

/// Mid and vega of each instrument at one trading state.
struct InstrumentMarks {
    std::span<const double> mid;
    std::span<const double> vega;
};

/// sum_i gamma_i |a_i| H_i inside the vega limit, +inf outside. Ignores mode.
double cost(const CostSpec& spec, std::span<const double> a, const InstrumentMarks& marks);

/// One-sided rates at a = 0, both stored as non-negative magnitudes.
struct MarginalRates {
    std::vector<double> plus;
    std::vector<double> minus;
};
MarginalRates marginal_rates(const CostSpec& spec, const InstrumentMarks& marks);

/// a+ . gamma+ + a- . |gamma-|
double marginal_cost(std::span<const double> a, const MarginalRates& rates);
double marginal_cost(const CostSpec& spec, std::span<const double> a, const InstrumentMarks& marks);

/// Marks of trading state (path, step) inside a returns table.
InstrumentMarks marks_at(const InstrumentReturn& returns, std::size_t path, std::size_t step);

/// Total cost per path under the spec's mode (None: zero; Marginal: M_T;
/// Full: C_T, possibly +inf). Actions share the returns layout.
std::vector<double> path_costs(const CostSpec& spec, const InstrumentReturn& returns, std::span<const double> actions);

}  // namespace driftless
