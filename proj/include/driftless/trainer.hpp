#pragma once

#include "driftless/frictions.hpp"
#include "driftless/market.hpp"
#include "driftless/policy.hpp"
#include "driftless/utility.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace driftless {

struct TrainConfig {
    std::size_t epochs = 150;
    std::size_t batch_size = 1000;  // paths per minibatch
    double learning_rate = 3e-3;
    double final_learning_rate = 1e-4;  // exponential decay towards this
    std::uint64_t seed = 1;
    double clip_norm = 10.0;
    double y_init = 0.0;
    std::vector<std::size_t> hidden{64, 64};
    double action_scale = 0.1;  // output scale is action_scale / (lambda * std(DH_i))
    double smooth_abs_eps = 1e-8;
    bool step_bias = true;  // per-(step, instrument) action offsets
    bool polish = true;

    void validate() const;
};

/// The sample problem sup_{y,a} E_w[u(s (y + Z + G(a) - C(a)))] - y.
/// Spans refer to caller-owned storage that must outlive the problem.
struct Problem {
    const InstrumentReturn* returns = nullptr;
    std::span<const double> features;  // row path * n_steps + t
    std::size_t feature_width = 0;
    std::span<const double> weights;     // empty: uniform
    std::span<const double> offset;      // Z per path, empty: 0
    std::span<const double> path_scale;  // s per path, empty: 1
    CostSpec spec;
    Utility utility = Utility::exponential(1.0);

    std::size_t n_paths() const { return returns->n_paths; }
    void validate() const;
};

struct Solution {
    Policy policy;
    double y_star = 0.0;
    double objective_value = 0.0;
    std::vector<double> trace;  // full-sample objective after each epoch
    std::size_t best_epoch = 0;
    TrainConfig config;
};

/// Actions of every trading state in the returns layout. Under a vega cap the
/// network output is shrunk radially onto the cap.
std::vector<double> policy_actions(const Problem& problem, const Policy& policy);

struct PathOutcome {
    std::vector<double> gains;
    std::vector<double> costs;  // under problem.spec.mode, exact |a|
};
PathOutcome path_outcomes(const Problem& problem, const Policy& policy);

/// Full-sample objective with exact |a| (smooth = false) or the training
/// smooth-abs cost (smooth = true).
double evaluate(const Problem& problem, const Policy& policy, double y, bool smooth = false, double eps = 1e-8);

/// Reverse-mode gradient of the smooth full-sample objective with respect to
/// the policy parameters (flattened, see Policy::flatten) and y. Returns the
/// objective value.
double gradient(const Problem& problem, const Policy& policy, double y, std::span<double> grad_params, double& grad_y,
                double eps = 1e-8);

/// Standardised inputs and output scale for a fresh policy.
Policy make_policy(const Problem& problem, const TrainConfig& config);

Solution train(const Problem& problem, const TrainConfig& config);

/// Damped Newton ascent of the exact objective over y, a factor s on the
/// network output and the step offsets, which leaves the first-order
/// conditions in these directions satisfied. Under a vega cap only y moves.
/// Returns the polished objective.
double polish(const Problem& problem, Policy& policy, double& y);

/// Features table of a bundle and a Problem view over it.
struct ProblemData {
    InstrumentReturn returns;
    std::vector<double> features;
    std::size_t feature_width = 0;
};
ProblemData make_problem_data(const PathBundle& bundle, std::span<const InstrumentSpec> instruments);
Problem make_problem(const ProblemData& data, const CostSpec& spec, const Utility& utility,
                     std::span<const double> weights = {});

}  // namespace driftless
