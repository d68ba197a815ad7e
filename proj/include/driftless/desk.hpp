#pragma once

#include "driftless/hedging.hpp"
#include "driftless/measure.hpp"
#include "driftless/trainer.hpp"
#include "driftless/var_model.hpp"

#include <cstdint>
#include <vector>

namespace driftless {

/// The default desk-scale scenario: synthetic VAR market on a 3x3 grid,
/// 10^4 paths of 10 daily steps, marginal costs of 10bp.
struct DeskConfig {
    std::vector<double> strikes{0.95, 1.0, 1.05};
    std::vector<double> maturity_days{20.0, 40.0, 60.0};
    double boundary_lo = 0.5;
    double annual_drift = 0.5;
    double annual_vol = 0.2;
    std::size_t paths = 10000;
    std::size_t steps = 10;
    std::uint64_t seed = 1;
    double gamma = 0.001;
    double lambda = 1.0;
    TrainConfig train;
};

struct DeskMarket {
    DlvGrid grid;
    SyntheticMarket market;
    PathBundle bundle;
};
DeskMarket make_desk_market(const DeskConfig& config);

CostSpec desk_cost(const DeskConfig& config);

/// Statistical-arbitrage solution on the full grid of instruments and the
/// density it induces.
struct DeskMeasure {
    std::vector<InstrumentSpec> instruments;
    ProblemData data;
    CostSpec spec;
    Utility utility;
    Solution solution;
    DensityWeights density;
};
DeskMeasure make_desk_measure(const DeskMarket& market, const DeskConfig& config);

/// Configuration of the fresh policy used to probe for remaining
/// statistical arbitrage: the network alone, trained for a short budget.
TrainConfig adversary_config(TrainConfig base);

/// Short digital at the money over the whole horizon, hedged with spot and
/// the 20d/40d ATM calls under the statistical and the reweighted measure,
/// plus the statistical-arbitrage strategy in the same instruments (used as
/// the default tilt direction).
struct DeskHedges {
    ProblemData data;
    std::vector<double> z;
    HedgeResult p;
    HedgeResult q;
    HedgeResult statarb;
};
DeskHedges make_desk_hedges(const DeskMarket& market, const DeskMeasure& measure, const DeskConfig& config,
                            const PayoffSpec& payoff_spec);

PayoffSpec desk_digital(const DeskConfig& config);

}  // namespace driftless
