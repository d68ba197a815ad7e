#pragma once

#include "driftless/frictions.hpp"
#include "driftless/market.hpp"
#include "driftless/trainer.hpp"
#include "driftless/utility.hpp"

#include <span>
#include <string>
#include <vector>

namespace driftless {

enum class DensityMode { Martingale, NearMartingale, Bounded };
const char* to_string(DensityMode mode) noexcept;

struct DensityWeights {
    std::vector<double> weights;  // mean 1 under the problem's base weights
    double raw_mean = 1.0;
    double mean_error = 0.0;  // |raw_mean - 1|
    DensityMode mode = DensityMode::Martingale;
};

/// D = s u'(s (y* + Z + G - M)) per path from a trained solution, normalised
/// to mean 1. Frictionless problems give a martingale density, marginal-cost
/// problems a near-martingale density, path-scaled problems the bounded one.
DensityWeights density(const Problem& problem, const Solution& solution);

struct MemmResult {
    double a_star = 0.0;
    std::vector<double> q;
};

/// One-period minimal entropy martingale measure for a single instrument.
MemmResult memm_one_period(std::span<const double> outcomes, std::span<const double> probs, double lambda);

struct DriftRow {
    std::size_t t = 0;
    std::size_t instrument = 0;
    std::string label;
    std::string bucket;  // "all" or "<up|down>_<low|mid|high>"
    std::size_t count = 0;
    double mean_dh = 0.0;
    double se = 0.0;
    double band_lo = 0.0;
    double band_hi = 0.0;
    bool pass = true;
};

struct DriftReport {
    double z = 3.0;
    std::vector<DriftRow> rows;     // unconditional, one per (t, instrument)
    std::vector<DriftRow> buckets;  // conditional on coarse state buckets
    std::size_t failures() const;
    std::size_t bucket_failures() const;
    bool all_pass() const { return failures() == 0; }
};

/// Weighted mean of DH per (t, i) against the marginal band widened by z
/// Monte Carlo standard errors. Empty weights mean uniform.
DriftReport verify_drift(const PathBundle& bundle, std::span<const InstrumentSpec> instruments,
                         const InstrumentReturn& returns, std::span<const double> weights, const CostSpec& spec,
                         double z = 3.0);

struct Histogram {
    std::vector<double> edges;   // bins + 1
    std::vector<double> counts;  // weighted counts
};
Histogram make_histogram(std::span<const double> values, std::span<const double> weights = {}, std::size_t bins = 50);

struct AdversarialResult {
    double certainty_equivalent = 0.0;
    Solution solution;
    std::vector<double> pnl;  // G - C per path
    Histogram histogram;
};

/// Trains a fresh policy on the weighted sample and reports its certainty
/// equivalent; near zero when the weights remove statistical arbitrage.
AdversarialResult adversarial_test(const ProblemData& data, std::span<const double> weights, const CostSpec& spec,
                                   const Utility& utility, const TrainConfig& config);

struct DivergenceResult {
    double value = 0.0;
    double se = 0.0;
};

/// Sample mean of u~(D), or of u~((1 + M) D) when bound_scale holds the
/// (1 + M) factors.
DivergenceResult divergence(std::span<const double> weights, const Utility& utility,
                            std::span<const double> bound_scale = {});

/// Per path 1 + max_{t,i} |DH|.
std::vector<double> bound_factors(const InstrumentReturn& returns);

struct BoundedResult {
    DensityWeights density;
    Solution solution;
    std::vector<double> factors;  // 1 + M
};

/// Frictionless density from the problem rescaled by 1 / (1 + M) per path.
BoundedResult bounded_reweight(const ProblemData& data, const Utility& utility, const TrainConfig& config);

}  // namespace driftless
