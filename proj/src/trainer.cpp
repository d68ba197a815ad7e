#include "driftless/trainer.hpp"
#include "driftless/error.hpp"
#include "driftless/parallel.hpp"
#include "driftless/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace driftless {

void TrainConfig::validate() const {
    if (epochs == 0) throw Error(ErrorKind::Validation, "epochs must be positive");
    if (batch_size == 0) throw Error(ErrorKind::Validation, "batch size must be positive");
    if (!(learning_rate > 0.0) || !(final_learning_rate > 0.0)) {
        throw Error(ErrorKind::Validation, "learning rates must be positive");
    }
    if (!(clip_norm > 0.0)) throw Error(ErrorKind::Validation, "clip norm must be positive");
    if (!std::isfinite(y_init)) throw Error(ErrorKind::Validation, "y init must be finite");
    if (!(action_scale > 0.0)) throw Error(ErrorKind::Validation, "action scale must be positive");
    if (!(smooth_abs_eps > 0.0)) throw Error(ErrorKind::Validation, "smooth-abs epsilon must be positive");
    for (auto w : hidden) {
        if (w == 0) throw Error(ErrorKind::Validation, "hidden widths must be positive");
    }
}

void Problem::validate() const {
    if (!returns) throw Error(ErrorKind::Validation, "problem has no returns");
    const std::size_t rows = returns->n_paths * returns->n_steps;
    if (returns->n_paths == 0 || returns->n_steps == 0 || returns->n_instruments == 0) {
        throw Error(ErrorKind::Shape, "empty returns table");
    }
    if (feature_width == 0 || features.size() != rows * feature_width) {
        throw Error(ErrorKind::Shape, "feature table does not match returns");
    }
    const std::size_t n = returns->n_paths;
    if (!weights.empty()) {
        if (weights.size() != n) throw Error(ErrorKind::Shape, "one weight per path required");
        for (double w : weights) {
            if (!(w > 0.0) || !std::isfinite(w)) throw Error(ErrorKind::Validation, "weights must be positive");
        }
    }
    if (!offset.empty() && offset.size() != n) throw Error(ErrorKind::Shape, "one offset per path required");
    if (!path_scale.empty()) {
        if (path_scale.size() != n) throw Error(ErrorKind::Shape, "one scale per path required");
        for (double s : path_scale) {
            if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorKind::Validation, "path scales must be positive");
        }
    }
    spec.validate(returns->n_instruments);
}

namespace {

constexpr std::size_t kChunk = 256;

struct Abs {
    bool smooth;
    double eps;
    double value(double a) const { return smooth ? std::sqrt(a * a + eps * eps) - eps : std::abs(a); }
    double slope(double a) const {
        if (smooth) return a / std::sqrt(a * a + eps * eps);
        return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
    }
};

bool projects(const CostSpec& spec) { return spec.mode == CostMode::Full && spec.vega_cap.has_value(); }

// Rows of actions for the given paths plus per-row projection factors.
struct ChunkActions {
    RowMatrix raw;     // out_scale * network output
    RowMatrix action;  // after the vega projection
    std::vector<double> factor;
    std::vector<double> vega_used;
    Mlp::Tape tape;
};

void chunk_actions(const Problem& pb, const Policy& policy, std::span<const std::size_t> paths, const Abs& abs,
                   bool keep_tape, ChunkActions& out) {
    const auto& r = *pb.returns;
    const std::size_t T = r.n_steps;
    const std::size_t n = r.n_instruments;
    const std::size_t f = pb.feature_width;
    RowMatrix x(static_cast<Eigen::Index>(paths.size() * T), static_cast<Eigen::Index>(f));
    for (std::size_t k = 0; k < paths.size(); ++k) {
        const double* src = pb.features.data() + paths[k] * T * f;
        std::copy(src, src + T * f, x.data() + k * T * f);
    }
    const RowMatrix xn = policy.normalise(x);
    RowMatrix o = keep_tape ? policy.mlp.forward(xn, out.tape) : policy.mlp.forward(xn);
    if (static_cast<std::size_t>(o.cols()) != n) throw Error(ErrorKind::Shape, "policy width does not match instruments");
    o.array().rowwise() *= policy.out_scale.array();
    if (policy.step_bias.size() > 0) {
        if (static_cast<std::size_t>(policy.step_bias.rows()) != T) {
            throw Error(ErrorKind::Shape, "policy step offsets do not match the horizon");
        }
        for (std::size_t k = 0; k < paths.size(); ++k) {
            o.middleRows(static_cast<Eigen::Index>(k * T), static_cast<Eigen::Index>(T)) += policy.step_bias;
        }
    }
    out.raw = std::move(o);
    out.action = out.raw;
    const std::size_t rows = paths.size() * T;
    out.factor.assign(rows, 1.0);
    out.vega_used.assign(rows, 0.0);
    if (!projects(pb.spec)) return;
    const double cap = *pb.spec.vega_cap * (1.0 - 1e-12);
    for (std::size_t k = 0; k < paths.size(); ++k) {
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t row = k * T + t;
            const double* vega = r.vega.data() + r.index(paths[k], t, 0);
            double v = 0.0;
            for (std::size_t i = 0; i < n; ++i) v += abs.value(out.raw(row, i)) * vega[i];
            out.vega_used[row] = v;
            if (v > cap) {
                out.factor[row] = cap / v;
                out.action.row(row) *= out.factor[row];
            }
        }
    }
}

struct ChunkOut {
    double objective = 0.0;  // sum of w u(x)
    double grad_y = 0.0;
};

// Forward (and optionally backward) pass over a list of paths. total_weight
// normalises the gradient; per-path gains, costs and x are written when the
// spans are non-empty (indexed by position in paths).
ChunkOut run_chunk(const Problem& pb, const Policy& policy, double y, std::span<const std::size_t> paths,
                   const Abs& abs, double total_weight, std::span<double> grad, std::span<double> gains_out,
                   std::span<double> costs_out, std::span<double> x_out) {
    const auto& r = *pb.returns;
    const std::size_t T = r.n_steps;
    const std::size_t n = r.n_instruments;
    const bool backward = !grad.empty();
    ChunkActions ca;
    chunk_actions(pb, policy, paths, abs, backward, ca);
    const bool costly = pb.spec.mode != CostMode::None;

    ChunkOut res;
    std::vector<double> dx(paths.size());
    for (std::size_t k = 0; k < paths.size(); ++k) {
        const std::size_t p = paths[k];
        double g = 0.0, c = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t row = k * T + t;
            const std::size_t base = r.index(p, t, 0);
            for (std::size_t i = 0; i < n; ++i) {
                const double a = ca.action(row, i);
                g += a * r.dh[base + i];
                if (costly) c += pb.spec.rate(i) * std::abs(r.mid[base + i]) * abs.value(a);
            }
        }
        const double s = pb.path_scale.empty() ? 1.0 : pb.path_scale[p];
        const double z = pb.offset.empty() ? 0.0 : pb.offset[p];
        const double w = pb.weights.empty() ? 1.0 : pb.weights[p];
        const double x = s * (y + z + g - c);
        res.objective += w * pb.utility.value(x);
        dx[k] = w * pb.utility.deriv(x) * s / total_weight;
        res.grad_y += dx[k];
        if (!gains_out.empty()) gains_out[k] = g;
        if (!costs_out.empty()) costs_out[k] = c;
        if (!x_out.empty()) x_out[k] = x;
    }
    if (!backward) return res;

    RowMatrix d_raw(ca.raw.rows(), ca.raw.cols());
    std::vector<double> ga(n);
    for (std::size_t k = 0; k < paths.size(); ++k) {
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t row = k * T + t;
            const std::size_t base = r.index(paths[k], t, 0);
            for (std::size_t i = 0; i < n; ++i) {
                double slope = r.dh[base + i];
                if (costly) slope -= pb.spec.rate(i) * std::abs(r.mid[base + i]) * abs.slope(ca.action(row, i));
                ga[i] = dx[k] * slope;
            }
            const double fct = ca.factor[row];
            if (fct < 1.0) {
                // a = b * cap / v(b)
                double gb = 0.0;
                for (std::size_t i = 0; i < n; ++i) gb += ga[i] * ca.raw(row, i);
                const double* vega = r.vega.data() + base;
                for (std::size_t i = 0; i < n; ++i) {
                    d_raw(row, i) = fct * ga[i] -
                                    fct / ca.vega_used[row] * vega[i] * abs.slope(ca.raw(row, i)) * gb;
                }
            } else {
                for (std::size_t i = 0; i < n; ++i) d_raw(row, i) = ga[i];
            }
        }
    }
    if (policy.step_bias.size() > 0) {
        const std::size_t off = policy.mlp.n_params();
        for (std::size_t k = 0; k < paths.size(); ++k) {
            for (std::size_t t = 0; t < T; ++t) {
                for (std::size_t i = 0; i < n; ++i) grad[off + t * n + i] += d_raw(k * T + t, i);
            }
        }
    }
    d_raw.array().rowwise() *= policy.out_scale.array();
    policy.mlp.backward(ca.tape, d_raw, grad);
    return res;
}

double weight_total(const Problem& pb, std::span<const std::size_t> paths) {
    if (pb.weights.empty()) return static_cast<double>(paths.size());
    double s = 0.0;
    for (auto p : paths) s += pb.weights[p];
    return s;
}

// Objective (sum of w u(x)) and gradient over a path list, reduced in fixed
// chunk order.
double run_paths(const Problem& pb, const Policy& policy, double y, std::span<const std::size_t> paths, const Abs& abs,
                 std::span<double> grad, double& grad_y) {
    const double total = weight_total(pb, paths);
    const std::size_t chunks = chunk_count(paths.size(), kChunk);
    const std::size_t np = grad.size();
    std::vector<double> obj(chunks, 0.0), gy(chunks, 0.0);
    // Eigen-aligned buffers: the vectorised kernels take different paths on
    // differently aligned memory, which would make the sums depend on the
    // allocator.
    std::vector<Eigen::VectorXd> grads(grad.empty() ? 0 : chunks);
    parallel_chunks(paths.size(), kChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
        std::span<double> g;
        if (!grad.empty()) {
            grads[c] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(np));
            g = std::span<double>(grads[c].data(), np);
        }
        const auto out = run_chunk(pb, policy, y, paths.subspan(b, e - b), abs, total, g, {}, {}, {});
        obj[c] = out.objective;
        gy[c] = out.grad_y;
    });
    double sum = 0.0;
    grad_y = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
        sum += obj[c];
        grad_y += gy[c];
        if (!grad.empty()) {
            for (std::size_t k = 0; k < np; ++k) grad[k] += grads[c](static_cast<Eigen::Index>(k));
        }
    }
    grad_y -= 1.0;
    return sum / total - y;
}

std::vector<std::size_t> all_paths(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

// Per-path x, gains and costs over the whole sample.
void outcomes(const Problem& pb, const Policy& policy, double y, const Abs& abs, std::vector<double>& x,
              std::vector<double>& g, std::vector<double>& c) {
    const std::size_t n = pb.n_paths();
    x.assign(n, 0.0);
    g.assign(n, 0.0);
    c.assign(n, 0.0);
    const auto paths = all_paths(n);
    parallel_chunks(n, kChunk, [&](std::size_t, std::size_t b, std::size_t e) {
        const std::span<const std::size_t> sub(paths.data() + b, e - b);
        run_chunk(pb, policy, y, sub, abs, 1.0, {}, std::span<double>(g).subspan(b, e - b),
                  std::span<double>(c).subspan(b, e - b), std::span<double>(x).subspan(b, e - b));
    });
}

double objective_from_x(const Problem& pb, std::span<const double> x, double y) {
    return sample_objective(pb.utility, x, pb.weights, 0.0) - y;
}

}  // namespace

std::vector<double> policy_actions(const Problem& problem, const Policy& policy) {
    problem.validate();
    const auto& r = *problem.returns;
    std::vector<double> out(r.dh.size());
    const auto paths = all_paths(r.n_paths);
    parallel_chunks(r.n_paths, kChunk, [&](std::size_t, std::size_t b, std::size_t e) {
        ChunkActions ca;
        chunk_actions(problem, policy, std::span<const std::size_t>(paths).subspan(b, e - b), Abs{false, 0.0}, false,
                      ca);
        std::copy(ca.action.data(), ca.action.data() + ca.action.size(), out.data() + r.index(b, 0, 0));
    });
    return out;
}

PathOutcome path_outcomes(const Problem& problem, const Policy& policy) {
    problem.validate();
    std::vector<double> x;
    PathOutcome out;
    outcomes(problem, policy, 0.0, Abs{false, 0.0}, x, out.gains, out.costs);
    return out;
}

double evaluate(const Problem& problem, const Policy& policy, double y, bool smooth, double eps) {
    problem.validate();
    std::vector<double> x, g, c;
    outcomes(problem, policy, y, Abs{smooth, eps}, x, g, c);
    return objective_from_x(problem, x, y);
}

double gradient(const Problem& problem, const Policy& policy, double y, std::span<double> grad_params, double& grad_y,
                double eps) {
    problem.validate();
    if (grad_params.size() != policy.n_params()) throw Error(ErrorKind::Shape, "gradient buffer size mismatch");
    std::fill(grad_params.begin(), grad_params.end(), 0.0);
    const auto paths = all_paths(problem.n_paths());
    return run_paths(problem, policy, y, paths, Abs{true, eps}, grad_params, grad_y);
}

Policy make_policy(const Problem& problem, const TrainConfig& config) {
    problem.validate();
    const auto& r = *problem.returns;
    const std::size_t f = problem.feature_width;
    const std::size_t rows = r.n_paths * r.n_steps;
    Policy policy;
    policy.in_shift = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(f));
    policy.in_scale = Eigen::RowVectorXd::Ones(static_cast<Eigen::Index>(f));
    for (std::size_t j = 0; j < f; ++j) {
        double mean = 0.0;
        for (std::size_t k = 0; k < rows; ++k) mean += problem.features[k * f + j];
        mean /= static_cast<double>(rows);
        double var = 0.0;
        for (std::size_t k = 0; k < rows; ++k) {
            const double d = problem.features[k * f + j] - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(rows));
        policy.in_shift(static_cast<Eigen::Index>(j)) = mean;
        if (sd > 1e-12) policy.in_scale(static_cast<Eigen::Index>(j)) = 1.0 / sd;
    }
    const std::size_t n = r.n_instruments;
    policy.out_scale = Eigen::RowVectorXd::Ones(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        double mean = 0.0, sq = 0.0;
        for (std::size_t k = 0; k < rows; ++k) mean += r.dh[k * n + i];
        mean /= static_cast<double>(rows);
        for (std::size_t k = 0; k < rows; ++k) sq += (r.dh[k * n + i] - mean) * (r.dh[k * n + i] - mean);
        const double sd = std::sqrt(sq / static_cast<double>(rows));
        const double scale = sd > 1e-12 ? sd : 1.0;
        policy.out_scale(static_cast<Eigen::Index>(i)) = config.action_scale / (problem.utility.lambda() * scale);
    }
    std::vector<std::size_t> widths{f};
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(n);
    policy.mlp = Mlp::random(widths, config.seed);
    if (config.step_bias) {
        policy.step_bias = RowMatrix::Zero(static_cast<Eigen::Index>(r.n_steps), static_cast<Eigen::Index>(n));
    }
    return policy;
}

double polish(const Problem& problem, Policy& policy, double& y) {
    problem.validate();
    const auto& r = *problem.returns;
    const std::size_t N = r.n_paths;
    const std::size_t T = r.n_steps;
    const std::size_t n = r.n_instruments;
    const std::size_t per = T * n;
    // Scaling and offsets act linearly on proportional costs; a vega cap
    // breaks that, so then only y moves.
    const bool linear = !projects(problem.spec);
    const bool has_bias = linear && policy.step_bias.size() > 0;
    const std::size_t V = linear ? 2 + (has_bias ? per : 0) : 1;
    const bool costly = problem.spec.mode != CostMode::None;

    std::vector<double> base(N), sc(N), w(N), fixed_r;
    double total = 0.0;
    for (std::size_t p = 0; p < N; ++p) {
        base[p] = problem.offset.empty() ? 0.0 : problem.offset[p];
        sc[p] = problem.path_scale.empty() ? 1.0 : problem.path_scale[p];
        w[p] = problem.weights.empty() ? 1.0 : problem.weights[p];
        total += w[p];
    }
    std::vector<double> net;  // network part of the actions, returns layout
    std::vector<double> rate_mid;
    if (linear) {
        Policy bare = policy;
        bare.step_bias.resize(0, 0);
        net = policy_actions(problem, bare);
        rate_mid.resize(N * per);
        for (std::size_t k = 0; k < N * per; ++k) {
            rate_mid[k] = costly ? problem.spec.rate(k % n) * std::abs(r.mid[k]) : 0.0;
        }
    } else {
        const auto out = path_outcomes(problem, policy);
        fixed_r.resize(N);
        for (std::size_t p = 0; p < N; ++p) fixed_r[p] = out.gains[p] - out.costs[p];
    }

    std::vector<double> v(V, 0.0);
    v[0] = y;
    if (linear) v[1] = 1.0;
    if (has_bias) std::copy(policy.step_bias.data(), policy.step_bias.data() + per, v.begin() + 2);

    auto action = [&](const std::vector<double>& vars, std::size_t p, std::size_t k) {
        return vars[1] * net[p * per + k] + (has_bias ? vars[2 + k] : 0.0);
    };
    // eps[i] > 0 smooths |a| of instrument i; empty means exact.
    std::vector<double> x(N);
    auto fill_x = [&](const std::vector<double>& vars, const std::vector<double>& eps) {
        for (std::size_t p = 0; p < N; ++p) {
            double g = 0.0;
            if (linear) {
                for (std::size_t k = 0; k < per; ++k) {
                    const double a = action(vars, p, k);
                    g += a * r.dh[p * per + k];
                    if (costly) {
                        const double e = eps.empty() ? 0.0 : eps[k % n];
                        g -= rate_mid[p * per + k] * (e > 0.0 ? std::sqrt(a * a + e * e) - e : std::abs(a));
                    }
                }
            } else {
                g = fixed_r[p];
            }
            x[p] = sc[p] * (vars[0] + base[p] + g);
        }
    };
    auto value = [&](const std::vector<double>& vars, const std::vector<double>& eps) {
        fill_x(vars, eps);
        return objective_from_x(problem, x, vars[0]);
    };

    // Newton ascent of the (smoothed) objective; returns false if it diverged.
    const auto Vi = static_cast<Eigen::Index>(V);
    Eigen::MatrixXd J(static_cast<Eigen::Index>(N), Vi);
    Eigen::VectorXd d1(static_cast<Eigen::Index>(N)), d2(static_cast<Eigen::Index>(N));
    auto newton = [&](std::vector<double>& vars, const std::vector<double>& eps, int max_iter) {
        double current = value(vars, eps);
        if (!std::isfinite(current)) return;
        std::vector<double> cand(V);
        for (int it = 0; it < max_iter; ++it) {
            fill_x(vars, eps);
            Eigen::MatrixXd kink = Eigen::MatrixXd::Zero(Vi, Vi);
            for (std::size_t p = 0; p < N; ++p) {
                const auto row = static_cast<Eigen::Index>(p);
                d1(row) = w[p] * problem.utility.deriv(x[p]) / total;
                d2(row) = w[p] * problem.utility.second(x[p]) / total;
                J(row, 0) = sc[p];
                if (!linear) continue;
                double ds = 0.0;
                const double m = d1(row) * sc[p];
                for (std::size_t k = 0; k < per; ++k) {
                    const double a = action(vars, p, k);
                    const double b = net[p * per + k];
                    double q = r.dh[p * per + k];
                    if (costly) {
                        const double e = eps[k % n];
                        const double root = std::sqrt(a * a + e * e);
                        q -= rate_mid[p * per + k] * a / root;
                        const double kappa = m * rate_mid[p * per + k] * e * e / (root * root * root);
                        kink(1, 1) += kappa * b * b;
                        if (has_bias) {
                            const auto c = static_cast<Eigen::Index>(2 + k);
                            kink(1, c) += kappa * b;
                            kink(c, c) += kappa;
                        }
                    }
                    ds += b * q;
                    if (has_bias) J(row, static_cast<Eigen::Index>(2 + k)) = sc[p] * q;
                }
                J(row, 1) = sc[p] * ds;
            }
            Eigen::VectorXd grad = J.transpose() * d1;
            grad(0) -= 1.0;
            if (!grad.allFinite() || grad.cwiseAbs().maxCoeff() < 1e-13) return;
            Eigen::MatrixXd curv = -(J.transpose() * d2.asDiagonal() * J);
            curv += kink.triangularView<Eigen::StrictlyUpper>().transpose();
            curv += kink;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(curv);
            const Eigen::VectorXd& lam = eig.eigenvalues();
            const double cutoff = 1e-12 * std::max(lam.maxCoeff(), 0.0);
            Eigen::VectorXd coef = eig.eigenvectors().transpose() * grad;
            for (Eigen::Index k = 0; k < coef.size(); ++k) coef(k) = lam(k) > cutoff && lam(k) > 0.0 ? coef(k) / lam(k) : 0.0;
            const Eigen::VectorXd step = eig.eigenvectors() * coef;
            double t = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 40; ++ls) {
                for (std::size_t k = 0; k < V; ++k) cand[k] = vars[k] + t * step(static_cast<Eigen::Index>(k));
                const double val = value(cand, eps);
                if (std::isfinite(val) && val > current) {
                    moved = true;
                    vars = cand;
                    current = val;
                    break;
                }
                t *= 0.5;
            }
            if (!moved) return;
        }
    };

    const std::vector<double> exact;
    double best = value(v, exact);
    if (!std::isfinite(best)) return best;
    if (linear && costly) {
        // Continuation in the smoothing width, relative to the output scale.
        std::vector<double> eps(n), cand = v;
        for (double rel : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
            for (std::size_t i = 0; i < n; ++i) eps[i] = rel * policy.out_scale(static_cast<Eigen::Index>(i));
            newton(cand, eps, 30);
            const double val = value(cand, exact);
            if (std::isfinite(val) && val > best) {
                best = val;
                v = cand;
            }
        }
    } else if (linear) {
        newton(v, exact, 50);
    }
    // y last, on the exact objective, so that E[w u'(x) s] = E[w] holds.
    {
        double current = value(v, exact);
        for (int it = 0; it < 100 && std::isfinite(current); ++it) {
            fill_x(v, exact);
            double g = -1.0, h = 0.0;
            for (std::size_t p = 0; p < N; ++p) {
                g += w[p] * problem.utility.deriv(x[p]) * sc[p] / total;
                h -= w[p] * problem.utility.second(x[p]) * sc[p] * sc[p] / total;
            }
            if (!(std::abs(g) > 1e-14) || !(h > 0.0)) break;
            double t = 1.0;
            bool moved = false;
            const double y0 = v[0];
            for (int ls = 0; ls < 60; ++ls) {
                v[0] = y0 + t * g / h;
                const double val = value(v, exact);
                if (std::isfinite(val) && val >= current) {
                    moved = val > current || std::abs(g) < 1e-10;
                    current = val;
                    break;
                }
                t *= 0.5;
            }
            if (!moved) {
                v[0] = y0;
                break;
            }
        }
    }

    if (linear && v[1] != 1.0) {
        auto& last = policy.mlp.layers().back();
        last.weight *= v[1];
        last.bias *= v[1];
    }
    if (has_bias) std::copy(v.begin() + 2, v.end(), policy.step_bias.data());
    y = v[0];
    return evaluate(problem, policy, y);
}

Solution train(const Problem& problem, const TrainConfig& config) {
    problem.validate();
    config.validate();
    Solution sol;
    sol.config = config;
    sol.policy = make_policy(problem, config);
    Policy& policy = sol.policy;

    const std::size_t n_paths = problem.n_paths();
    const std::size_t np = policy.n_params();
    std::vector<double> params = policy.flatten();
    double y = config.y_init;
    std::vector<double> m(np + 1, 0.0), v(np + 1, 0.0), grad(np);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::size_t step = 0;

    std::vector<double> best_params = params;
    double best_y = y;
    double best = evaluate(problem, policy, y);
    sol.best_epoch = 0;
    std::vector<std::size_t> order = all_paths(n_paths);
    const std::size_t batch = std::min(config.batch_size, n_paths);
    const Abs abs{true, config.smooth_abs_eps};

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double frac = config.epochs > 1 ? static_cast<double>(epoch) / static_cast<double>(config.epochs - 1) : 0.0;
        const double lr = config.learning_rate * std::pow(config.final_learning_rate / config.learning_rate, frac);
        UniformStream shuffle(config.seed, static_cast<std::uint32_t>(epoch), 0xB47C, 0);
        for (std::size_t k = n_paths; k > 1; --k) {
            const auto j = static_cast<std::size_t>(shuffle() * static_cast<double>(k));
            std::swap(order[k - 1], order[std::min(j, k - 1)]);
        }
        for (std::size_t b = 0; b < n_paths; b += batch) {
            const std::size_t e = std::min(n_paths, b + batch);
            std::fill(grad.begin(), grad.end(), 0.0);
            double gy = 0.0;
            const std::span<const std::size_t> ids(order.data() + b, e - b);
            run_paths(problem, policy, y, ids, abs, grad, gy);
            double norm = gy * gy;
            for (double g : grad) norm += g * g;
            norm = std::sqrt(norm);
            if (!std::isfinite(norm)) {
                throw Error(ErrorKind::Training,
                            "non-finite gradient at epoch " + std::to_string(epoch) + "; last objective " +
                                (sol.trace.empty() ? std::string("n/a") : std::to_string(sol.trace.back())));
            }
            const double clip = norm > config.clip_norm ? config.clip_norm / norm : 1.0;
            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t k = 0; k <= np; ++k) {
                const double g = clip * (k < np ? grad[k] : gy);
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                const double upd = lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + adam_eps);
                if (k < np) params[k] += upd; else y += upd;
            }
            policy.unflatten(params);
        }
        const double obj = evaluate(problem, policy, y);
        if (std::isnan(obj)) {
            throw Error(ErrorKind::Training,
                        "objective became NaN at epoch " + std::to_string(epoch) + "; last objective " +
                            (sol.trace.empty() ? std::string("n/a") : std::to_string(sol.trace.back())));
        }
        sol.trace.push_back(obj);
        if (obj > best) {
            best = obj;
            best_params = params;
            best_y = y;
            sol.best_epoch = epoch + 1;
        }
    }
    policy.unflatten(best_params);
    y = best_y;
    if (config.polish) polish(problem, policy, y);
    sol.y_star = y;
    sol.objective_value = evaluate(problem, policy, y);
    return sol;
}

ProblemData make_problem_data(const PathBundle& bundle, std::span<const InstrumentSpec> instruments) {
    ProblemData d;
    d.returns = build_returns(bundle, instruments);
    d.features = feature_table(bundle);
    d.feature_width = feature_length(bundle.grid);
    return d;
}

Problem make_problem(const ProblemData& data, const CostSpec& spec, const Utility& utility,
                     std::span<const double> weights) {
    Problem pb;
    pb.returns = &data.returns;
    pb.features = data.features;
    pb.feature_width = data.feature_width;
    pb.weights = weights;
    pb.spec = spec;
    pb.utility = utility;
    pb.validate();
    return pb;
}

}  // namespace driftless
