#include "driftless/var_model.hpp"
#include "driftless/dlv.hpp"
#include "driftless/error.hpp"
#include "driftless/rng.hpp"

#include <cmath>
#include <string>

namespace driftless {

void VarParams::validate() const {
    const auto d = static_cast<Eigen::Index>(dim);
    if (dim == 0 || a1.rows() != d || a1.cols() != d || a2.rows() != d || a2.cols() != d || b.size() != d ||
        chol.rows() != d || chol.cols() != d) {
        throw Error(ErrorKind::Shape, "VAR parameter shapes do not match dim " + std::to_string(dim));
    }
    if (!a1.allFinite() || !a2.allFinite() || !b.allFinite() || !chol.allFinite() || !(dt > 0.0)) {
        throw Error(ErrorKind::Validation, "VAR parameters must be finite with dt > 0");
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        if (chol(i, i) < 0.0) throw Error(ErrorKind::Validation, "Cholesky diagonal must be non-negative");
        for (Eigen::Index j = i + 1; j < d; ++j) {
            if (chol(i, j) != 0.0) throw Error(ErrorKind::Validation, "Cholesky factor must be lower-triangular");
        }
    }
}

VarFit fit_var(const Eigen::MatrixXd& history, double dt) {
    const Eigen::Index n = history.rows();
    const Eigen::Index d = history.cols();
    if (d == 0 || n < 10 * d + 2) {
        throw Error(ErrorKind::Fit, "history needs at least 10 d + 2 = " + std::to_string(10 * d + 2) + " rows, got " +
                                        std::to_string(n));
    }
    if (!history.allFinite()) throw Error(ErrorKind::Fit, "history contains non-finite entries");
    if (!(dt > 0.0)) throw Error(ErrorKind::Fit, "dt must be positive");

    const Eigen::Index rows = n - 2;
    const Eigen::Index k = 2 * d + 1;
    Eigen::MatrixXd x(rows, k);
    x.col(0).setOnes();
    x.block(0, 1, rows, d) = history.middleRows(1, rows);
    x.block(0, 1 + d, rows, d) = history.topRows(rows);
    const Eigen::MatrixXd y = history.bottomRows(rows);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) {
        throw Error(ErrorKind::Fit, "regressor matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                                        std::to_string(k) + ")");
    }
    const Eigen::MatrixXd beta = qr.solve(y);
    const Eigen::MatrixXd resid = y - x * beta;
    const double dof = static_cast<double>(rows - k);
    Eigen::MatrixXd cov = resid.transpose() * resid / dof;

    // (X'X)^{-1} = P R^{-1} R^{-T} P'
    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::MatrixXd xtx_inv_perm = r_inv * r_inv.transpose();
    const auto perm = qr.colsPermutation();
    const Eigen::MatrixXd xtx_inv = perm * xtx_inv_perm * perm.transpose();

    VarFit fit;
    fit.n_obs = static_cast<std::size_t>(rows);
    VarParams& p = fit.params;
    p.dim = static_cast<std::size_t>(d);
    p.dt = dt;
    p.b = beta.row(0).transpose() / dt;
    p.a1 = -beta.middleRows(1, d).transpose() / dt;
    p.a2 = -beta.middleRows(1 + d, d).transpose() / dt;

    fit.se_b.resize(d);
    fit.se_a1.resize(d, d);
    fit.se_a2.resize(d, d);
    for (Eigen::Index e = 0; e < d; ++e) {
        const double s2 = cov(e, e);
        fit.se_b(e) = std::sqrt(s2 * xtx_inv(0, 0)) / dt;
        for (Eigen::Index c = 0; c < d; ++c) {
            fit.se_a1(e, c) = std::sqrt(s2 * xtx_inv(1 + c, 1 + c)) / dt;
            fit.se_a2(e, c) = std::sqrt(s2 * xtx_inv(1 + d + c, 1 + d + c)) / dt;
        }
    }

    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        cov += 1e-10 * Eigen::MatrixXd::Identity(d, d);
        llt.compute(cov);
        fit.ridge_applied = true;
        if (llt.info() != Eigen::Success) throw Error(ErrorKind::Fit, "residual covariance is not positive definite");
    }
    fit.residual_cov = cov;
    p.chol = Eigen::MatrixXd(llt.matrixL()) / std::sqrt(dt);
    return fit;
}

namespace {

void step_var(const VarParams& p, const Eigen::VectorXd& prev2, const Eigen::VectorXd& prev, NormalStream& normals,
              Eigen::VectorXd& g, Eigen::VectorXd& out) {
    for (Eigen::Index k = 0; k < g.size(); ++k) g(k) = normals();
    out.noalias() = (p.b - p.a1 * prev - p.a2 * prev2) * p.dt;
    out.noalias() += std::sqrt(p.dt) * (p.chol * g);
}

}  // namespace

PathBundle simulate(const VarParams& params, const DlvGrid& grid, const Eigen::VectorXd& init_prev,
                    const Eigen::VectorXd& init, std::size_t n_paths, std::size_t n_steps, std::uint64_t seed,
                    const SimulationOptions& options) {
    params.validate();
    grid.validate();
    const std::size_t nodes = grid.n_nodes();
    if (params.dim != 1 + nodes) {
        throw Error(ErrorKind::Shape, "VAR dimension " + std::to_string(params.dim) + " does not match 1 + " +
                                          std::to_string(nodes) + " grid nodes");
    }
    if (init.size() != static_cast<Eigen::Index>(params.dim) || init_prev.size() != init.size()) {
        throw Error(ErrorKind::Shape, "initial vectors must have the VAR dimension");
    }
    if (n_paths == 0 || n_steps == 0) throw Error(ErrorKind::Validation, "n_paths and n_steps must be >= 1");

    PathBundle bundle;
    bundle.grid = grid;
    bundle.seed = seed;
    bundle.provenance = "VAR";
    bundle.resize(n_paths, n_steps);

    const Eigen::Index d = static_cast<Eigen::Index>(params.dim);
    Eigen::VectorXd prev2(d), prev(d), next(d), g(d);
    std::vector<double> log_spot(n_steps + 1);
    std::vector<double> sig((n_steps + 1) * nodes);

    for (std::size_t p = 0; p < n_paths; ++p) {
        bool accepted = false;
        for (int attempt = 0; attempt <= options.max_retries && !accepted; ++attempt) {
            prev2 = init_prev;
            prev = init;
            log_spot[0] = 0.0;
            for (std::size_t k = 0; k < nodes; ++k) sig[k] = std::exp(init(static_cast<Eigen::Index>(k + 1)));
            bool ok = true;
            for (std::size_t t = 1; t <= n_steps && ok; ++t) {
                NormalStream normals(seed, static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(t),
                                     static_cast<std::uint32_t>(attempt));
                step_var(params, prev2, prev, normals, g, next);
                log_spot[t] = log_spot[t - 1] + next(0);
                for (std::size_t k = 0; k < nodes; ++k) {
                    const double s = std::exp(next(static_cast<Eigen::Index>(k + 1)));
                    if (!std::isfinite(s) || s > options.sigma_max) ok = false;
                    sig[t * nodes + k] = s;
                }
                if (!std::isfinite(log_spot[t])) ok = false;
                prev2 = prev;
                prev = next;
            }
            if (!ok) continue;
            accepted = true;
            for (std::size_t t = 0; t <= n_steps; ++t) {
                const std::size_t s = bundle.state_index(p, t);
                bundle.spot[s] = std::exp(log_spot[t]);
                std::copy_n(sig.data() + t * nodes, nodes, bundle.dlv.data() + s * nodes);
            }
        }
        if (!accepted) {
            throw Error(ErrorKind::Simulation, "path " + std::to_string(p) + " exceeded sigma_max after " +
                                                   std::to_string(options.max_retries) + " retries");
        }
    }
    bundle.recompute_prices();
    return bundle;
}

Eigen::MatrixXd simulate_history(const VarParams& params, const Eigen::VectorXd& init_prev,
                                 const Eigen::VectorXd& init, std::size_t n, std::uint64_t seed) {
    params.validate();
    const Eigen::Index d = static_cast<Eigen::Index>(params.dim);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d);
    Eigen::VectorXd prev2 = init_prev, prev = init, next(d), g(d);
    for (std::size_t r = 0; r < n; ++r) {
        // Stream coordinates disjoint from simulate()'s (path, step, attempt).
        NormalStream normals(seed, 0xFFFFFFFFu, static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r >> 32));
        step_var(params, prev2, prev, normals, g, next);
        out.row(static_cast<Eigen::Index>(r)) = next.transpose();
        prev2 = prev;
        prev = next;
    }
    return out;
}

SyntheticMarket synthetic_market(const DlvGrid& grid, double annual_drift, double annual_vol) {
    grid.validate();
    const std::size_t n = grid.n_strikes();
    const std::size_t m = grid.n_maturities();
    const Eigen::Index d = static_cast<Eigen::Index>(1 + n * m);
    const double dt = 1.0 / kDaysPerYear;

    // AR(2) persistence of log DLVs, summing to 0.97 per day.
    const double phi1 = 0.90;
    const double phi2 = 0.07;
    const double vol_of_logvol = 0.01;  // daily
    const double spot_vol_corr = -0.7;
    const double vol_vol_corr = 0.9;

    SyntheticMarket out;
    VarParams& p = out.params;
    p.dim = static_cast<std::size_t>(d);
    p.dt = dt;
    p.a1 = Eigen::MatrixXd::Zero(d, d);
    p.a2 = Eigen::MatrixXd::Zero(d, d);
    p.b = Eigen::VectorXd::Zero(d);
    out.init = Eigen::VectorXd::Zero(d);

    p.b(0) = annual_drift - 0.5 * annual_vol * annual_vol;
    // Base surface: the DLVs that reproduce flat Black-Scholes prices at the
    // spot volatility on the lattice, so that the only mispricing comes from
    // the drift and the predictable part of the DLV dynamics.
    CallGrid cg{grid, std::vector<double>((m + 1) * (n + 2))};
    for (std::size_t j = 0; j <= m; ++j) {
        for (std::size_t i = 0; i <= n + 1; ++i) {
            const double x = grid.node(i);
            double c = bs_call(x, grid.tau(j), annual_vol);
            if (i == 0) c = 1.0 - x;
            if (i == n + 1 || j == 0) c = j == 0 ? std::max(1.0 - x, 0.0) : 0.0;
            cg.at(j, i) = c;
        }
    }
    const DlvSurface base = dlv_from_prices(cg);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::Index k = static_cast<Eigen::Index>(1 + j * n + i);
            const double level = std::log(std::max(base.at(j, i), 0.02));
            out.init(k) = level;
            p.b(k) = (1.0 - phi1 - phi2) * level / dt;
            p.a1(k, k) = -phi1 / dt;
            p.a2(k, k) = -phi2 / dt;
        }
    }
    out.init_prev = out.init;

    Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(d, d, vol_vol_corr);
    corr.diagonal().setOnes();
    for (Eigen::Index k = 1; k < d; ++k) corr(0, k) = corr(k, 0) = spot_vol_corr;
    Eigen::VectorXd daily_sd = Eigen::VectorXd::Constant(d, vol_of_logvol);
    daily_sd(0) = annual_vol * std::sqrt(dt);
    const Eigen::MatrixXd cov = daily_sd.asDiagonal() * corr * daily_sd.asDiagonal() / dt;
    p.chol = Eigen::MatrixXd(Eigen::LLT<Eigen::MatrixXd>(cov).matrixL());
    return out;
}

}  // namespace driftless
