#include "driftless/measure.hpp"
#include "driftless/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace driftless {

const char* to_string(DensityMode mode) noexcept {
    switch (mode) {
    case DensityMode::Martingale: return "martingale";
    case DensityMode::NearMartingale: return "near_martingale";
    case DensityMode::Bounded: return "bounded";
    }
    return "martingale";
}

DensityWeights density(const Problem& problem, const Solution& solution) {
    problem.validate();
    DensityWeights out;
    if (!problem.path_scale.empty()) {
        out.mode = DensityMode::Bounded;
    } else if (problem.spec.mode == CostMode::None) {
        out.mode = DensityMode::Martingale;
    } else if (problem.spec.mode == CostMode::Marginal) {
        out.mode = DensityMode::NearMartingale;
    } else {
        throw Error(ErrorKind::Validation, "densities need a frictionless or marginal-cost solution");
    }
    const auto outcome = path_outcomes(problem, solution.policy);
    const std::size_t n = problem.n_paths();
    out.weights.resize(n);
    double total = 0.0, acc = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const double s = problem.path_scale.empty() ? 1.0 : problem.path_scale[p];
        const double z = problem.offset.empty() ? 0.0 : problem.offset[p];
        const double d = s * problem.utility.deriv(s * (solution.y_star + z + outcome.gains[p] - outcome.costs[p]));
        if (!(d > 0.0) || !std::isfinite(d)) {
            throw Error(ErrorKind::Construction, "density is not positive and finite on path " + std::to_string(p));
        }
        out.weights[p] = d;
        const double w = problem.weights.empty() ? 1.0 : problem.weights[p];
        total += w;
        acc += w * d;
    }
    out.raw_mean = acc / total;
    out.mean_error = std::abs(out.raw_mean - 1.0);
    for (double& d : out.weights) d /= out.raw_mean;
    return out;
}

MemmResult memm_one_period(std::span<const double> outcomes, std::span<const double> probs, double lambda) {
    if (outcomes.empty() || outcomes.size() != probs.size()) {
        throw Error(ErrorKind::Shape, "one probability per outcome required");
    }
    if (!(lambda > 0.0)) throw Error(ErrorKind::Validation, "lambda must be positive");
    double psum = 0.0;
    bool pos = false, neg = false;
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
        if (!(probs[k] > 0.0)) throw Error(ErrorKind::Validation, "probabilities must be positive");
        psum += probs[k];
        pos = pos || outcomes[k] > 0.0;
        neg = neg || outcomes[k] < 0.0;
    }
    if (std::abs(psum - 1.0) > 1e-12) throw Error(ErrorKind::Validation, "probabilities must sum to 1");
    if (!pos || !neg) throw Error(ErrorKind::Arbitrage, "one-signed outcomes admit classic arbitrage");

    // g(b) = sum p x e^{-b x} is strictly decreasing in b = lambda a; values
    // are shifted by the largest exponent.
    auto eval = [&](double b, double* slope) {
        double shift = -std::numeric_limits<double>::infinity();
        for (double x : outcomes) shift = std::max(shift, -b * x);
        double g = 0.0, d = 0.0, z = 0.0;
        for (std::size_t k = 0; k < outcomes.size(); ++k) {
            const double e = probs[k] * std::exp(-b * outcomes[k] - shift);
            g += outcomes[k] * e;
            d -= outcomes[k] * outcomes[k] * e;
            z += e;
        }
        if (slope) *slope = d / z;
        return g / z;
    };
    double lo = -1.0, hi = 1.0;
    while (eval(lo, nullptr) < 0.0) lo *= 2.0;
    while (eval(hi, nullptr) > 0.0) hi *= 2.0;
    double b = 0.0;
    if (!(b > lo && b < hi)) b = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double slope = 0.0;
        const double g = eval(b, &slope);
        if (g == 0.0) break;
        if (g > 0.0) lo = b; else hi = b;
        double next = slope < 0.0 ? b - g / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == b || hi - lo < 1e-16 * std::max(1.0, std::abs(b))) {
            b = next;
            break;
        }
        b = next;
    }
    MemmResult res;
    res.a_star = b / lambda;
    double shift = -std::numeric_limits<double>::infinity();
    for (double x : outcomes) shift = std::max(shift, -b * x);
    res.q.resize(outcomes.size());
    double z = 0.0;
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
        res.q[k] = probs[k] * std::exp(-b * outcomes[k] - shift);
        z += res.q[k];
    }
    for (double& q : res.q) q /= z;
    return res;
}

std::size_t DriftReport::failures() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const DriftRow& r) { return !r.pass; }));
}

std::size_t DriftReport::bucket_failures() const {
    return static_cast<std::size_t>(
        std::count_if(buckets.begin(), buckets.end(), [](const DriftRow& r) { return !r.pass; }));
}

namespace {

std::size_t nearest_atm(const DlvGrid& grid) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.n_strikes(); ++i) {
        if (std::abs(grid.strikes[i] - 1.0) < std::abs(grid.strikes[best] - 1.0)) best = i;
    }
    return best;
}

DriftRow drift_row(const InstrumentReturn& r, std::span<const double> weights, const CostSpec& spec, double z,
                   std::size_t t, std::size_t i, std::span<const std::size_t> paths) {
    DriftRow row;
    row.t = t;
    row.instrument = i;
    row.count = paths.size();
    double sw = 0.0, m = 0.0, lo = 0.0, hi = 0.0;
    for (auto p : paths) {
        const double w = weights.empty() ? 1.0 : weights[p];
        const std::size_t k = r.index(p, t, i);
        sw += w;
        m += w * r.dh[k];
        if (spec.mode != CostMode::None) {
            // Marginal rates at zero trade; the vega limit is inactive there.
            const double rate = spec.rate(i) * std::abs(r.mid[k]);
            hi += w * rate;
            lo += w * rate;
        }
    }
    m /= sw;
    double var = 0.0;
    for (auto p : paths) {
        const double w = weights.empty() ? 1.0 : weights[p];
        const double d = r.dh[r.index(p, t, i)] - m;
        var += w * w * d * d;
    }
    row.mean_dh = m;
    row.se = std::sqrt(var) / sw;
    row.band_lo = -lo / sw;
    row.band_hi = hi / sw;
    row.pass = m >= row.band_lo - z * row.se && m <= row.band_hi + z * row.se;
    return row;
}

}  // namespace

DriftReport verify_drift(const PathBundle& bundle, std::span<const InstrumentSpec> instruments,
                         const InstrumentReturn& returns, std::span<const double> weights, const CostSpec& spec,
                         double z) {
    if (returns.n_paths != bundle.n_paths || returns.n_steps != bundle.n_steps) {
        throw Error(ErrorKind::Shape, "returns do not match the bundle");
    }
    if (instruments.size() != returns.n_instruments) throw Error(ErrorKind::Shape, "one spec per instrument required");
    if (!weights.empty() && weights.size() != returns.n_paths) throw Error(ErrorKind::Shape, "one weight per path");
    for (double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w)) throw Error(ErrorKind::Validation, "weights must be positive");
    }
    spec.validate(returns.n_instruments);
    DriftReport rep;
    rep.z = z;
    const std::size_t n = returns.n_paths;
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const std::size_t atm = nearest_atm(bundle.grid);
    for (std::size_t t = 0; t < returns.n_steps; ++t) {
        for (std::size_t i = 0; i < returns.n_instruments; ++i) {
            auto row = drift_row(returns, weights, spec, z, t, i, all);
            row.label = instruments[i].label();
            row.bucket = "all";
            rep.rows.push_back(std::move(row));
        }
        if (t == 0) continue;
        // Buckets: sign of the last spot return x tercile of short-dated ATM vol.
        std::vector<double> vol(n);
        for (std::size_t p = 0; p < n; ++p) vol[p] = bundle.sigma_at(p, t)[atm];
        std::vector<double> sorted = vol;
        std::sort(sorted.begin(), sorted.end());
        const double q1 = sorted[n / 3];
        const double q2 = sorted[(2 * n) / 3];
        std::vector<std::size_t> members[6];
        for (std::size_t p = 0; p < n; ++p) {
            const bool up = bundle.spot_at(p, t) >= bundle.spot_at(p, t - 1);
            const int tercile = vol[p] < q1 ? 0 : (vol[p] < q2 ? 1 : 2);
            members[(up ? 0 : 3) + tercile].push_back(p);
        }
        static const char* names[6] = {"up_low", "up_mid", "up_high", "down_low", "down_mid", "down_high"};
        for (int b = 0; b < 6; ++b) {
            if (members[b].size() < 2) continue;
            for (std::size_t i = 0; i < returns.n_instruments; ++i) {
                auto row = drift_row(returns, weights, spec, z, t, i, members[b]);
                row.label = instruments[i].label();
                row.bucket = names[b];
                rep.buckets.push_back(std::move(row));
            }
        }
    }
    return rep;
}

Histogram make_histogram(std::span<const double> values, std::span<const double> weights, std::size_t bins) {
    if (values.empty()) throw Error(ErrorKind::Shape, "empty sample");
    if (bins == 0) throw Error(ErrorKind::Validation, "need at least one bin");
    if (!weights.empty() && weights.size() != values.size()) throw Error(ErrorKind::Shape, "one weight per value");
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    double lo = *mn, hi = *mx;
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
    h.counts.assign(bins, 0.0);
    for (std::size_t k = 0; k < values.size(); ++k) {
        auto b = static_cast<std::size_t>((values[k] - lo) / (hi - lo) * static_cast<double>(bins));
        b = std::min(b, bins - 1);
        h.counts[b] += weights.empty() ? 1.0 : weights[k];
    }
    return h;
}

AdversarialResult adversarial_test(const ProblemData& data, std::span<const double> weights, const CostSpec& spec,
                                   const Utility& utility, const TrainConfig& config) {
    const Problem pb = make_problem(data, spec, utility, weights);
    AdversarialResult res;
    res.solution = train(pb, config);
    res.certainty_equivalent = res.solution.objective_value;
    const auto out = path_outcomes(pb, res.solution.policy);
    res.pnl.resize(out.gains.size());
    for (std::size_t p = 0; p < res.pnl.size(); ++p) res.pnl[p] = out.gains[p] - out.costs[p];
    res.histogram = make_histogram(res.pnl, weights);
    return res;
}

DivergenceResult divergence(std::span<const double> weights, const Utility& utility,
                            std::span<const double> bound_scale) {
    if (weights.empty()) throw Error(ErrorKind::Shape, "empty weights");
    if (!bound_scale.empty() && bound_scale.size() != weights.size()) {
        throw Error(ErrorKind::Shape, "one bound factor per path required");
    }
    const std::size_t n = weights.size();
    std::vector<double> v(n);
    for (std::size_t p = 0; p < n; ++p) {
        const double d = bound_scale.empty() ? weights[p] : bound_scale[p] * weights[p];
        if (!utility.in_legendre_domain(d)) {
            throw Error(ErrorKind::Domain, "density " + std::to_string(d) + " on path " + std::to_string(p) +
                                               " is outside the domain of the conjugate utility");
        }
        v[p] = utility.legendre(d);
    }
    DivergenceResult res;
    res.value = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double e : v) ss += (e - res.value) * (e - res.value);
    res.se = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    return res;
}

std::vector<double> bound_factors(const InstrumentReturn& returns) {
    std::vector<double> out(returns.n_paths, 1.0);
    for (std::size_t p = 0; p < returns.n_paths; ++p) {
        double m = 0.0;
        const std::size_t base = returns.index(p, 0, 0);
        for (std::size_t k = 0; k < returns.per_path(); ++k) m = std::max(m, std::abs(returns.dh[base + k]));
        out[p] = 1.0 + m;
    }
    return out;
}

BoundedResult bounded_reweight(const ProblemData& data, const Utility& utility, const TrainConfig& config) {
    BoundedResult res;
    res.factors = bound_factors(data.returns);
    std::vector<double> scale(res.factors.size());
    for (std::size_t p = 0; p < scale.size(); ++p) scale[p] = 1.0 / res.factors[p];
    CostSpec none;
    none.mode = CostMode::None;
    Problem pb = make_problem(data, none, utility);
    pb.path_scale = scale;
    res.solution = train(pb, config);
    res.density = density(pb, res.solution);
    return res;
}

}  // namespace driftless
