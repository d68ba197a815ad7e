#pragma once

#include "driftless/rng.hpp"
#include "driftless/trainer.hpp"
#include "driftless/utility.hpp"
#include "driftless/var_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace testing_support {

// One-period market with a single instrument: path k moves by outcomes[k].
// Mids are 1 and vegas 0, the single feature is constant.
inline driftless::ProblemData one_period(const std::vector<double>& outcomes) {
    driftless::ProblemData d;
    auto& r = d.returns;
    r.n_paths = outcomes.size();
    r.n_steps = 1;
    r.n_instruments = 1;
    r.dh = outcomes;
    r.mid.assign(outcomes.size(), 1.0);
    r.vega.assign(outcomes.size(), 0.0);
    d.feature_width = 1;
    d.features.assign(outcomes.size(), 1.0);
    return d;
}

inline driftless::CostSpec no_cost() {
    driftless::CostSpec s;
    s.gamma = {0.0};
    s.mode = driftless::CostMode::None;
    return s;
}

inline driftless::TrainConfig small_config(std::size_t epochs = 40) {
    driftless::TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 64;
    c.hidden = {8};
    c.learning_rate = 1e-2;
    c.final_learning_rate = 1e-3;
    return c;
}

// Stable VAR(2) with unit step: persistence 0.5 and -0.2 on the diagonal,
// small random cross terms and a random lower-triangular noise factor.
inline driftless::VarParams random_var(std::size_t d, std::uint64_t seed) {
    driftless::UniformStream u(seed, 0x7A5, 0, 0);
    const auto n = static_cast<Eigen::Index>(d);
    driftless::VarParams p;
    p.dim = d;
    p.dt = 1.0;
    p.a1 = Eigen::MatrixXd::Zero(n, n);
    p.a2 = Eigen::MatrixXd::Zero(n, n);
    p.b = Eigen::VectorXd::Zero(n);
    p.chol = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        p.b(i) = 0.2 * (u() - 0.5);
        for (Eigen::Index j = 0; j < n; ++j) {
            p.a1(i, j) = (i == j ? -0.5 : 0.0) + 0.1 * (u() - 0.5) / static_cast<double>(n);
            p.a2(i, j) = (i == j ? 0.2 : 0.0) + 0.1 * (u() - 0.5) / static_cast<double>(n);
            if (j < i) p.chol(i, j) = 0.05 * (u() - 0.5);
        }
        p.chol(i, i) = 0.1 + 0.05 * u();
    }
    return p;
}

// Sample-level OCE axioms on random payoff pairs: monotonicity, midpoint
// concavity, cash invariance, U(0) = 0 and U(X) <= max X. Returns an empty
// string on success, else a description of the first violation.
inline std::string check_oce_axioms(const driftless::Utility& u, std::size_t trials, std::uint64_t seed) {
    driftless::UniformStream r(seed, 0x0CE, 0, 0);
    const std::size_t n = 64;
    const std::vector<double> zero(n, 0.0);
    if (std::abs(driftless::oce(u, zero).value) > 1e-14) return "U(0) != 0";
    for (std::size_t k = 0; k < trials; ++k) {
        std::vector<double> x(n), y(n), lo(n), mid(n), shifted(n);
        const double scale = 0.1 + 2.0 * r();
        const double cash = 2.0 * (r() - 0.5);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = scale * (r() - 0.5) * 2.0;
            y[i] = scale * (r() - 0.5) * 2.0;
            lo[i] = x[i] - r() * scale;
            mid[i] = 0.5 * (x[i] + y[i]);
            shifted[i] = x[i] + cash;
        }
        const double ux = driftless::oce(u, x).value;
        const double uy = driftless::oce(u, y).value;
        const double tol = 1e-10 * (1.0 + scale);
        if (driftless::oce(u, lo).value > ux + tol) return "monotonicity at trial " + std::to_string(k);
        if (driftless::oce(u, mid).value < 0.5 * (ux + uy) - tol) return "concavity at trial " + std::to_string(k);
        if (std::abs(driftless::oce(u, shifted).value - (ux + cash)) > tol) return "cash invariance at trial " + std::to_string(k);
        if (ux > *std::max_element(x.begin(), x.end()) + tol) return "U(X) > max X at trial " + std::to_string(k);
    }
    return {};
}

// Random small problem (features of width 4, two instruments, 16 paths,
// 3 steps) with a network of widths [4, 8, 2] and random step offsets.
struct GradientCase {
    driftless::ProblemData data;
    std::vector<double> weights, offset, scale;
    driftless::Problem problem;
    driftless::Policy policy;
    double y = 0.0;
};

inline GradientCase gradient_case(std::uint64_t seed, driftless::CostMode mode, const driftless::Utility& u,
                                  bool weighted, bool offset, bool scaled) {
    driftless::UniformStream r(seed, 0x6AD, 0, 0);
    GradientCase c;
    auto& ret = c.data.returns;
    ret.n_paths = 16;
    ret.n_steps = 3;
    ret.n_instruments = 2;
    const std::size_t cells = 16 * 3 * 2;
    for (std::size_t k = 0; k < cells; ++k) {
        ret.dh.push_back(0.4 * (r() - 0.5));
        ret.mid.push_back(0.05 + r());
        ret.vega.push_back(0.1 * r());
    }
    c.data.feature_width = 4;
    for (std::size_t k = 0; k < 16 * 3 * 4; ++k) c.data.features.push_back(2.0 * (r() - 0.5));
    for (std::size_t p = 0; p < 16; ++p) {
        if (weighted) c.weights.push_back(0.5 + r());
        if (offset) c.offset.push_back(0.3 * (r() - 0.5));
        if (scaled) c.scale.push_back(0.5 + r());
    }
    driftless::CostSpec spec;
    spec.gamma = {0.01};
    spec.mode = mode;
    c.problem = driftless::make_problem(c.data, spec, u, c.weights);
    c.problem.offset = c.offset;
    c.problem.path_scale = c.scale;
    driftless::TrainConfig tc;
    tc.hidden = {8};
    tc.seed = seed;
    tc.action_scale = 2.0;
    c.policy = driftless::make_policy(c.problem, tc);
    for (Eigen::Index t = 0; t < c.policy.step_bias.rows(); ++t) {
        for (Eigen::Index i = 0; i < c.policy.step_bias.cols(); ++i) c.policy.step_bias(t, i) = r() - 0.5;
    }
    c.y = 0.2 * (r() - 0.5);
    return c;
}

// Largest relative error between the reverse-mode gradient (all policy
// parameters and y) and central differences with step h; the denominator is
// floored at 1e-6 so coordinates with vanishing gradients compare absolutely.
inline double gradient_error(const GradientCase& c, double h = 1e-5, double smooth_eps = 1e-3) {
    std::vector<double> g(c.policy.n_params());
    double gy = 0.0;
    driftless::gradient(c.problem, c.policy, c.y, g, gy, smooth_eps);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); };
    const std::vector<double> base = c.policy.flatten();
    driftless::Policy p = c.policy;
    double worst = 0.0;
    for (std::size_t k = 0; k < base.size(); ++k) {
        std::vector<double> v = base;
        v[k] = base[k] + h;
        p.unflatten(v);
        const double up = driftless::evaluate(c.problem, p, c.y, true, smooth_eps);
        v[k] = base[k] - h;
        p.unflatten(v);
        const double dn = driftless::evaluate(c.problem, p, c.y, true, smooth_eps);
        worst = std::max(worst, rel(g[k], (up - dn) / (2 * h)));
    }
    const double fy = (driftless::evaluate(c.problem, c.policy, c.y + h, true, smooth_eps) -
                       driftless::evaluate(c.problem, c.policy, c.y - h, true, smooth_eps)) /
                      (2 * h);
    return std::max(worst, rel(gy, fy));
}

}  // namespace testing_support
