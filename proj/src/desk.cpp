#include "driftless/desk.hpp"

#include <algorithm>

namespace driftless {

DeskMarket make_desk_market(const DeskConfig& config) {
    DeskMarket out{make_grid(config.strikes, config.maturity_days, config.boundary_lo), {}, {}};
    out.market = synthetic_market(out.grid, config.annual_drift, config.annual_vol);
    out.bundle = simulate(out.market.params, out.grid, out.market.init_prev, out.market.init, config.paths,
                          config.steps, config.seed);
    return out;
}

CostSpec desk_cost(const DeskConfig& config) {
    CostSpec spec;
    spec.gamma = {config.gamma};
    spec.mode = CostMode::Marginal;
    return spec;
}

DeskMeasure make_desk_measure(const DeskMarket& market, const DeskConfig& config) {
    DeskMeasure m{grid_instruments(market.grid), {}, desk_cost(config), Utility::exponential(config.lambda), {}, {}};
    m.data = make_problem_data(market.bundle, m.instruments);
    const Problem pb = make_problem(m.data, m.spec, m.utility);
    m.solution = train(pb, config.train);
    m.density = density(pb, m.solution);
    return m;
}

TrainConfig adversary_config(TrainConfig base) {
    base.epochs = 30;
    base.step_bias = false;
    base.polish = false;
    return base;
}

PayoffSpec desk_digital(const DeskConfig& config) {
    PayoffSpec p;
    p.kind = PayoffSpec::Kind::DigitalCall;
    p.rel_strike = 1.0;
    p.maturity_steps = config.steps;
    p.side = -1.0;
    return p;
}

DeskHedges make_desk_hedges(const DeskMarket& market, const DeskMeasure& measure, const DeskConfig& config,
                            const PayoffSpec& payoff_spec) {
    const auto instruments = hedging_instruments();
    DeskHedges h{make_problem_data(market.bundle, instruments), payoff(payoff_spec, market.bundle), {}, {}, {}};
    CostSpec spec;
    spec.gamma = {config.gamma};
    spec.mode = CostMode::Full;
    TrainConfig tc = config.train;
    tc.epochs = std::max<std::size_t>(1, tc.epochs * 2 / 3);
    h.p = deep_hedge(h.data, {}, h.z, spec, measure.utility, tc);
    h.q = deep_hedge(h.data, measure.density.weights, h.z, spec, measure.utility, tc);
    h.statarb = deep_hedge(h.data, {}, {}, spec, measure.utility, tc);
    return h;
}

}  // namespace driftless
