#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace driftless {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DenseLayer {
    Eigen::MatrixXd weight;  // fan_in x fan_out
    Eigen::VectorXd bias;    // fan_out
};

/// Feed-forward network, ReLU on hidden layers and a linear output layer.
/// Rows of the input matrix are samples.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<DenseLayer> layers);

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases keyed by seed.
    static Mlp random(std::span<const std::size_t> widths, std::uint64_t seed);
    static Mlp zeros(std::span<const std::size_t> widths);

    std::size_t input_width() const;
    std::size_t output_width() const;
    std::vector<std::size_t> widths() const;
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<DenseLayer>& layers() noexcept { return layers_; }

    /// Intermediate values kept for the backward sweep.
    struct Tape {
        std::vector<RowMatrix> inputs;  // input of each layer
        std::vector<RowMatrix> pre;     // pre-activation of each hidden layer
    };

    RowMatrix forward(const RowMatrix& x) const;
    RowMatrix forward(const RowMatrix& x, Tape& tape) const;
    std::vector<double> forward(std::span<const double> features) const;

    /// Accumulates d objective / d parameters into grad (flattened layout,
    /// see flatten()) given d objective / d output.
    void backward(const Tape& tape, const RowMatrix& d_out, std::span<double> grad) const;

    std::size_t n_params() const;
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> params);

private:
    std::vector<DenseLayer> layers_;
};

/// The trading policy: feature standardisation, the network, a fixed
/// per-instrument output scale and an additive offset per (step, instrument),
/// a_t = out_scale * mlp((f - shift) * in_scale) + step_bias[t].
struct Policy {
    Mlp mlp;
    Eigen::RowVectorXd in_shift;
    Eigen::RowVectorXd in_scale;
    Eigen::RowVectorXd out_scale;
    RowMatrix step_bias;  // n_steps x n_instruments, empty when unused

    RowMatrix normalise(const RowMatrix& features) const;
    /// Actions for feature rows observed at the given steps.
    RowMatrix act(const RowMatrix& features, std::span<const std::size_t> steps) const;
    std::vector<double> act(std::span<const double> features, std::size_t step) const;
    std::size_t n_instruments() const { return static_cast<std::size_t>(out_scale.size()); }

    /// Network parameters followed by step_bias (row-major).
    std::size_t n_params() const { return mlp.n_params() + static_cast<std::size_t>(step_bias.size()); }
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> params);
};

}  // namespace driftless
