#include "driftless/frictions.hpp"
#include "driftless/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace driftless {

const char* to_string(CostMode mode) noexcept {
    switch (mode) {
    case CostMode::None: return "none";
    case CostMode::Marginal: return "marginal";
    case CostMode::Full: return "full";
    }
    return "none";
}

CostMode cost_mode_from_string(const std::string& s) {
    if (s == "none") return CostMode::None;
    if (s == "marginal") return CostMode::Marginal;
    if (s == "full") return CostMode::Full;
    throw Error(ErrorKind::Validation, "unknown cost mode '" + s + "'");
}

void CostSpec::validate(std::size_t n_instruments) const {
    if (gamma.empty() || (gamma.size() != 1 && gamma.size() != n_instruments)) {
        throw Error(ErrorKind::Validation, "gamma needs one rate or one per instrument");
    }
    for (double g : gamma) {
        if (!(g >= 0.0) || !std::isfinite(g)) throw Error(ErrorKind::Validation, "cost rates must be >= 0");
    }
    if (vega_cap && !(*vega_cap > 0.0)) throw Error(ErrorKind::Validation, "vega cap must be > 0");
}

double cost(const CostSpec& spec, std::span<const double> a, const InstrumentMarks& marks) {
    double total = 0.0;
    double vega_used = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        total += spec.rate(i) * std::abs(a[i]) * std::abs(marks.mid[i]);
        vega_used += std::abs(a[i]) * marks.vega[i];
    }
    if (spec.vega_cap && vega_used > *spec.vega_cap) return std::numeric_limits<double>::infinity();
    return total;
}

MarginalRates marginal_rates(const CostSpec& spec, const InstrumentMarks& marks) {
    MarginalRates r;
    r.plus.resize(marks.mid.size());
    r.minus.resize(marks.mid.size());
    if (spec.mode == CostMode::None) return r;
    // The vega limit is inactive at a = 0, so only the proportional part counts.
    for (std::size_t i = 0; i < marks.mid.size(); ++i) {
        r.plus[i] = spec.rate(i) * std::abs(marks.mid[i]);
        r.minus[i] = r.plus[i];
    }
    return r;
}

double marginal_cost(std::span<const double> a, const MarginalRates& rates) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m += a[i] > 0.0 ? a[i] * rates.plus[i] : -a[i] * rates.minus[i];
    }
    return m;
}

double marginal_cost(const CostSpec& spec, std::span<const double> a, const InstrumentMarks& marks) {
    return marginal_cost(a, marginal_rates(spec, marks));
}

InstrumentMarks marks_at(const InstrumentReturn& returns, std::size_t path, std::size_t step) {
    const std::size_t off = returns.index(path, step, 0);
    return {{returns.mid.data() + off, returns.n_instruments}, {returns.vega.data() + off, returns.n_instruments}};
}

std::vector<double> path_costs(const CostSpec& spec, const InstrumentReturn& returns, std::span<const double> actions) {
    if (actions.size() != returns.dh.size()) throw Error(ErrorKind::Shape, "actions do not match returns");
    std::vector<double> out(returns.n_paths, 0.0);
    if (spec.mode == CostMode::None) return out;
    const std::size_t n = returns.n_instruments;
    for (std::size_t p = 0; p < returns.n_paths; ++p) {
        double acc = 0.0;
        for (std::size_t t = 0; t < returns.n_steps; ++t) {
            const auto marks = marks_at(returns, p, t);
            const std::span<const double> a(actions.data() + returns.index(p, t, 0), n);
            acc += spec.mode == CostMode::Full ? cost(spec, a, marks) : marginal_cost(spec, a, marks);
        }
        out[p] = acc;
    }
    return out;
}

}  // namespace driftless
