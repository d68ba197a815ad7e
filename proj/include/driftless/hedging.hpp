#pragma once

#include "driftless/frictions.hpp"
#include "driftless/market.hpp"
#include "driftless/measure.hpp"
#include "driftless/trainer.hpp"
#include "driftless/utility.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace driftless {

struct PayoffSpec {
    enum class Kind { DigitalCall, VanillaCall, VanillaPut, CustomTable };

    Kind kind = Kind::DigitalCall;
    double rel_strike = 1.0;
    std::size_t maturity_steps = 0;
    double side = -1.0;  // -1 short, +1 long
    // CustomTable: payoff as a function of S_maturity / S_0, linear between
    // knots and flat outside.
    std::vector<std::pair<double, double>> table;

    void validate(std::size_t horizon) const;
};

const char* to_string(PayoffSpec::Kind kind) noexcept;
PayoffSpec::Kind payoff_kind_from_string(const std::string& s);

/// Per-path payoff Z. The digital pays when S_maturity / S_0 > k strictly.
std::vector<double> payoff(const PayoffSpec& spec, const PathBundle& bundle);

/// Spot plus the ATM calls at 20 and 40 business days.
std::vector<InstrumentSpec> hedging_instruments();

struct PnlStats {
    double mean = 0.0;
    double std = 0.0;
    double q01 = 0.0;
    double q99 = 0.0;
};
/// Weighted moments and quantiles; empty weights mean uniform.
PnlStats pnl_stats(std::span<const double> pnl, std::span<const double> weights = {});

struct HedgeResult {
    Solution solution;
    double y = 0.0;
    double certainty_equivalent = 0.0;
    std::vector<double> pnl;  // Z + G - C per path
    PnlStats stats;
};

/// Maximises the weighted OCE of y + Z + G - C.
HedgeResult deep_hedge(const ProblemData& data, std::span<const double> weights, std::span<const double> z,
                       const CostSpec& spec, const Utility& utility, const TrainConfig& config);

struct DecomposeReport {
    double median_residual = 0.0;  // median over states of |a_P - a_Q - a_0|
    double median_norm_p = 0.0;    // median over states of |a_P|
    PnlStats hedge_p;              // Z + G(a_P)
    PnlStats hedge_q;              // Z + G(a_Q)
    PnlStats hedge_p_minus_statarb;  // Z + G(a_P) - G(a_0)
    double ce_p = 0.0;
    double ce_q = 0.0;
    double ce_statarb = 0.0;
};

/// Frictionless check that the statistical hedge splits into the hedge under
/// the martingale weights plus the pure statistical-arbitrage strategy.
DecomposeReport decompose_check(const ProblemData& data, std::span<const double> q_weights, const Utility& utility,
                                std::span<const double> z, const TrainConfig& config);

struct TiltResult {
    std::vector<double> weights;  // mean 1
    double theta = 0.0;
    double entropy = 0.0;  // mean(w log w)
};

/// Exponential tilt w ~ exp(-theta direction) with relative entropy c.
TiltResult tilt(std::span<const double> direction, double c);

struct RobustnessRow {
    double c = 0.0;
    double theta = 0.0;
    double entropy = 0.0;
    double ce_p = 0.0;
    double ce_q = 0.0;
    double delta_p = 0.0;  // CE(uniform) - CE(tilted)
    double delta_q = 0.0;
    PnlStats stats_p;
    PnlStats stats_q;
};

struct RobustnessReport {
    double ce_p_uniform = 0.0;
    double ce_q_uniform = 0.0;
    double se_p = 0.0;  // Monte Carlo standard error of the uniform CE
    double se_q = 0.0;
    std::vector<RobustnessRow> rows;
};

/// CE of two fixed hedges under tilts of the sample towards paths where
/// direction is small.
RobustnessReport robustness_eval(std::span<const double> pnl_p, std::span<const double> pnl_q,
                                 std::span<const double> direction, const Utility& utility,
                                 std::span<const double> entropies);

/// Monte Carlo standard error of the OCE of pnl under uniform weights.
double oce_standard_error(const Utility& utility, std::span<const double> pnl);

}  // namespace driftless
