#include "driftless/hedging.hpp"
#include "driftless/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace driftless {

const char* to_string(PayoffSpec::Kind kind) noexcept {
    switch (kind) {
    case PayoffSpec::Kind::DigitalCall: return "digital_call";
    case PayoffSpec::Kind::VanillaCall: return "vanilla_call";
    case PayoffSpec::Kind::VanillaPut: return "vanilla_put";
    case PayoffSpec::Kind::CustomTable: return "custom_table";
    }
    return "digital_call";
}

PayoffSpec::Kind payoff_kind_from_string(const std::string& s) {
    if (s == "digital_call") return PayoffSpec::Kind::DigitalCall;
    if (s == "vanilla_call") return PayoffSpec::Kind::VanillaCall;
    if (s == "vanilla_put") return PayoffSpec::Kind::VanillaPut;
    if (s == "custom_table") return PayoffSpec::Kind::CustomTable;
    throw Error(ErrorKind::Validation, "unknown payoff kind '" + s + "'");
}

void PayoffSpec::validate(std::size_t horizon) const {
    if (maturity_steps == 0 || maturity_steps > horizon) {
        throw Error(ErrorKind::Validation, "payoff maturity " + std::to_string(maturity_steps) +
                                               " outside 1.." + std::to_string(horizon));
    }
    if (!(rel_strike > 0.0) || !std::isfinite(rel_strike)) throw Error(ErrorKind::Validation, "strike must be > 0");
    if (!std::isfinite(side) || side == 0.0) throw Error(ErrorKind::Validation, "side must be non-zero");
    if (kind == Kind::CustomTable) {
        if (table.empty()) throw Error(ErrorKind::Validation, "custom payoff needs a table");
        for (std::size_t k = 1; k < table.size(); ++k) {
            if (!(table[k].first > table[k - 1].first)) {
                throw Error(ErrorKind::Validation, "custom payoff knots must increase");
            }
        }
    }
}

std::vector<double> payoff(const PayoffSpec& spec, const PathBundle& bundle) {
    spec.validate(bundle.n_steps);
    std::vector<double> z(bundle.n_paths);
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        const double x = bundle.spot_at(p, spec.maturity_steps) / bundle.spot_at(p, 0);
        double v = 0.0;
        switch (spec.kind) {
        case PayoffSpec::Kind::DigitalCall: v = x > spec.rel_strike ? 1.0 : 0.0; break;
        case PayoffSpec::Kind::VanillaCall: v = std::max(x - spec.rel_strike, 0.0); break;
        case PayoffSpec::Kind::VanillaPut: v = std::max(spec.rel_strike - x, 0.0); break;
        case PayoffSpec::Kind::CustomTable: {
            const auto& t = spec.table;
            if (x <= t.front().first) {
                v = t.front().second;
            } else if (x >= t.back().first) {
                v = t.back().second;
            } else {
                const auto it = std::upper_bound(t.begin(), t.end(), x,
                                                 [](double a, const std::pair<double, double>& k) { return a < k.first; });
                const auto& hi = *it;
                const auto& lo = *(it - 1);
                v = lo.second + (hi.second - lo.second) * (x - lo.first) / (hi.first - lo.first);
            }
            break;
        }
        }
        z[p] = spec.side * v;
    }
    return z;
}

std::vector<InstrumentSpec> hedging_instruments() {
    return {InstrumentSpec::spot(), InstrumentSpec::call(1.0, 20), InstrumentSpec::call(1.0, 40)};
}

PnlStats pnl_stats(std::span<const double> pnl, std::span<const double> weights) {
    if (pnl.empty()) throw Error(ErrorKind::Shape, "empty sample");
    if (!weights.empty() && weights.size() != pnl.size()) throw Error(ErrorKind::Shape, "one weight per value");
    auto w = [&](std::size_t k) { return weights.empty() ? 1.0 : weights[k]; };
    double sw = 0.0, m = 0.0;
    for (std::size_t k = 0; k < pnl.size(); ++k) {
        sw += w(k);
        m += w(k) * pnl[k];
    }
    m /= sw;
    double var = 0.0;
    for (std::size_t k = 0; k < pnl.size(); ++k) var += w(k) * (pnl[k] - m) * (pnl[k] - m);
    PnlStats s;
    s.mean = m;
    s.std = std::sqrt(var / sw);
    std::vector<std::size_t> order(pnl.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pnl[a] < pnl[b]; });
    auto quantile = [&](double q) {
        double acc = 0.0;
        for (auto k : order) {
            acc += w(k);
            if (acc >= q * sw) return pnl[k];
        }
        return pnl[order.back()];
    };
    s.q01 = quantile(0.01);
    s.q99 = quantile(0.99);
    return s;
}

HedgeResult deep_hedge(const ProblemData& data, std::span<const double> weights, std::span<const double> z,
                       const CostSpec& spec, const Utility& utility, const TrainConfig& config) {
    Problem pb = make_problem(data, spec, utility, weights);
    pb.offset = z;
    pb.validate();
    HedgeResult res;
    res.solution = train(pb, config);
    res.y = res.solution.y_star;
    res.certainty_equivalent = res.solution.objective_value;
    const auto out = path_outcomes(pb, res.solution.policy);
    res.pnl.resize(out.gains.size());
    for (std::size_t p = 0; p < res.pnl.size(); ++p) {
        res.pnl[p] = (z.empty() ? 0.0 : z[p]) + out.gains[p] - out.costs[p];
    }
    res.stats = pnl_stats(res.pnl, weights);
    return res;
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

}  // namespace

DecomposeReport decompose_check(const ProblemData& data, std::span<const double> q_weights, const Utility& utility,
                                std::span<const double> z, const TrainConfig& config) {
    if (utility.family() != Utility::Family::Exponential) {
        throw Error(ErrorKind::Validation, "the decomposition holds for exponential utility");
    }
    CostSpec none;
    none.mode = CostMode::None;
    const auto hp = deep_hedge(data, {}, z, none, utility, config);
    const auto hq = deep_hedge(data, q_weights, z, none, utility, config);
    const auto h0 = deep_hedge(data, {}, {}, none, utility, config);

    const Problem pb = make_problem(data, none, utility);
    const auto ap = policy_actions(pb, hp.solution.policy);
    const auto aq = policy_actions(pb, hq.solution.policy);
    const auto a0 = policy_actions(pb, h0.solution.policy);
    const std::size_t n = data.returns.n_instruments;
    const std::size_t states = ap.size() / n;
    std::vector<double> resid(states), norm(states);
    for (std::size_t s = 0; s < states; ++s) {
        double r2 = 0.0, p2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = s * n + i;
            const double d = ap[k] - aq[k] - a0[k];
            r2 += d * d;
            p2 += ap[k] * ap[k];
        }
        resid[s] = std::sqrt(r2);
        norm[s] = std::sqrt(p2);
    }
    DecomposeReport rep;
    rep.median_residual = median(resid);
    rep.median_norm_p = median(norm);
    rep.ce_p = hp.certainty_equivalent;
    rep.ce_q = hq.certainty_equivalent;
    rep.ce_statarb = h0.certainty_equivalent;
    rep.hedge_p = pnl_stats(hp.pnl);
    rep.hedge_q = pnl_stats(hq.pnl);
    std::vector<double> net(hp.pnl.size());
    for (std::size_t p = 0; p < net.size(); ++p) net[p] = hp.pnl[p] - h0.pnl[p];
    rep.hedge_p_minus_statarb = pnl_stats(net);
    return rep;
}

TiltResult tilt(std::span<const double> direction, double c) {
    if (direction.empty()) throw Error(ErrorKind::Shape, "empty direction");
    if (!(c >= 0.0) || !std::isfinite(c)) throw Error(ErrorKind::Validation, "entropy target must be >= 0");
    for (double d : direction) {
        if (!std::isfinite(d)) throw Error(ErrorKind::Validation, "tilt direction must be finite");
    }
    const std::size_t n = direction.size();
    TiltResult res;
    res.weights.assign(n, 1.0);
    if (c == 0.0) return res;

    // w_k = exp(-theta d_k) / mean(exp(-theta d)); entropy is mean(w log w).
    auto weights_at = [&](double theta, std::vector<double>& w) {
        double shift = -std::numeric_limits<double>::infinity();
        for (double d : direction) shift = std::max(shift, -theta * d);
        double sum = 0.0;
        w.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            w[k] = std::exp(-theta * direction[k] - shift);
            sum += w[k];
        }
        const double mean = sum / static_cast<double>(n);
        double h = 0.0;
        for (double& e : w) {
            e /= mean;
            if (e > 0.0) h += e * std::log(e);
        }
        return h / static_cast<double>(n);
    };
    const auto [mn, mx] = std::minmax_element(direction.begin(), direction.end());
    const double range = *mx - *mn;
    if (!(range > 0.0)) throw Error(ErrorKind::Tilt, "tilt direction is constant");
    // The entropy is bounded by log(n / #argmin) as theta grows.
    const auto at_min = static_cast<double>(std::count(direction.begin(), direction.end(), *mn));
    const double h_max = std::log(static_cast<double>(n) / at_min);
    if (c >= h_max - 1e-9) {
        throw Error(ErrorKind::Tilt, "entropy " + std::to_string(c) + " unreachable (supremum " +
                                         std::to_string(h_max) + ")");
    }
    std::vector<double> w;
    double lo = 0.0, hi = 1.0 / range;
    while (weights_at(hi, w) < c) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw Error(ErrorKind::Tilt, "could not bracket the tilt parameter");
    }
    double theta = hi;
    for (int it = 0; it < 300; ++it) {
        theta = 0.5 * (lo + hi);
        const double h = weights_at(theta, w);
        if (std::abs(h - c) < 1e-12) break;
        if (h < c) lo = theta; else hi = theta;
        if (hi - lo <= 1e-16 * hi) break;
    }
    res.entropy = weights_at(theta, res.weights);
    res.theta = theta;
    if (std::abs(res.entropy - c) > 1e-6) {
        throw Error(ErrorKind::Tilt, "tilt entropy " + std::to_string(res.entropy) + " missed target " +
                                         std::to_string(c));
    }
    return res;
}

double oce_standard_error(const Utility& utility, std::span<const double> pnl) {
    const auto o = oce(utility, pnl);
    const std::size_t n = pnl.size();
    if (n < 2) return 0.0;
    std::vector<double> v(n);
    double m = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        v[k] = utility.value(o.y_star + pnl[k]);
        m += v[k];
    }
    m /= static_cast<double>(n);
    double ss = 0.0;
    for (double e : v) ss += (e - m) * (e - m);
    return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

RobustnessReport robustness_eval(std::span<const double> pnl_p, std::span<const double> pnl_q,
                                 std::span<const double> direction, const Utility& utility,
                                 std::span<const double> entropies) {
    if (pnl_p.size() != pnl_q.size() || pnl_p.size() != direction.size()) {
        throw Error(ErrorKind::Shape, "pnl and direction lengths differ");
    }
    RobustnessReport rep;
    rep.ce_p_uniform = oce(utility, pnl_p).value;
    rep.ce_q_uniform = oce(utility, pnl_q).value;
    rep.se_p = oce_standard_error(utility, pnl_p);
    rep.se_q = oce_standard_error(utility, pnl_q);
    for (double c : entropies) {
        const auto t = tilt(direction, c);
        RobustnessRow row;
        row.c = c;
        row.theta = t.theta;
        row.entropy = t.entropy;
        row.ce_p = oce(utility, pnl_p, t.weights).value;
        row.ce_q = oce(utility, pnl_q, t.weights).value;
        row.delta_p = rep.ce_p_uniform - row.ce_p;
        row.delta_q = rep.ce_q_uniform - row.ce_q;
        row.stats_p = pnl_stats(pnl_p, t.weights);
        row.stats_q = pnl_stats(pnl_q, t.weights);
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace driftless
