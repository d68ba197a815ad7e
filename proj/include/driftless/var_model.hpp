#pragma once

#include "driftless/grid.hpp"
#include "driftless/market.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace driftless {

// Y_r = (B - A1 Y_{r-1} - A2 Y_{r-2}) dt + sqrt(dt) Z_r,  Z_r ~ N(0, chol chol')
// with Y_r = (log S_r / S_{r-1}, log sigma^{1,1}_r, ..., log sigma^{m,n}_r).
struct VarParams {
    std::size_t dim = 0;
    Eigen::MatrixXd a1;
    Eigen::MatrixXd a2;
    Eigen::VectorXd b;
    Eigen::MatrixXd chol;
    double dt = 1.0 / kDaysPerYear;

    void validate() const;
};

struct VarFit {
    VarParams params;
    Eigen::VectorXd se_b;
    Eigen::MatrixXd se_a1;
    Eigen::MatrixXd se_a2;
    Eigen::MatrixXd residual_cov;  // covariance of sqrt(dt) Z, i.e. Sigma * dt
    std::size_t n_obs = 0;
    bool ridge_applied = false;
};

/// Ordinary least squares per equation on rows (1, Y_{r-1}, Y_{r-2}).
/// history is N x d, one observation per row.
VarFit fit_var(const Eigen::MatrixXd& history, double dt);

struct SimulationOptions {
    double sigma_max = 5.0;
    int max_retries = 100;
};

/// Paths of spot and DLV surfaces driven by the VAR. init_prev and init are
/// Y_{-1} and Y_0; state 0 carries spot 1 and the DLVs exp(init[1:]).
/// Draws are keyed by (seed, path, step, attempt), so the result does not
/// depend on evaluation order.
PathBundle simulate(const VarParams& params, const DlvGrid& grid, const Eigen::VectorXd& init_prev,
                    const Eigen::VectorXd& init, std::size_t n_paths, std::size_t n_steps, std::uint64_t seed,
                    const SimulationOptions& options = {});

/// A single long trajectory of Y (rows 0..n-1, starting after init), used to
/// produce synthetic histories.
Eigen::MatrixXd simulate_history(const VarParams& params, const Eigen::VectorXd& init_prev,
                                 const Eigen::VectorXd& init, std::size_t n, std::uint64_t seed);

/// Synthetic index-like dynamics on a grid: spot log-returns with the given
/// annual drift and volatility, log DLVs mean-reverting (AR(2)) around a
/// base surface that is flat in Black-Scholes vol, spot/vol correlation -0.7.
struct SyntheticMarket {
    VarParams params;
    Eigen::VectorXd init_prev;
    Eigen::VectorXd init;
};
SyntheticMarket synthetic_market(const DlvGrid& grid, double annual_drift, double annual_vol = 0.2);

}  // namespace driftless
