#include "driftless/policy.hpp"
#include "driftless/error.hpp"
#include "driftless/rng.hpp"

#include <cmath>
#include <string>

namespace driftless {

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw Error(ErrorKind::Validation, "network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.bias.size() != layer.weight.cols()) throw Error(ErrorKind::Shape, "bias width mismatch");
        if (l > 0 && layer.weight.rows() != layers_[l - 1].weight.cols()) {
            throw Error(ErrorKind::Shape, "layer " + std::to_string(l) + " input width mismatch");
        }
        if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
            throw Error(ErrorKind::Validation, "network parameters must be finite");
        }
    }
}

Mlp Mlp::random(std::span<const std::size_t> widths, std::uint64_t seed) {
    if (widths.size() < 2) throw Error(ErrorKind::Validation, "network needs input and output widths");
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(widths[l]);
        const auto out = static_cast<Eigen::Index>(widths[l + 1]);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        UniformStream uni(seed, static_cast<std::uint32_t>(l), 0x5EED, 0);
        DenseLayer layer{Eigen::MatrixXd(in, out), Eigen::VectorXd(out)};
        for (Eigen::Index r = 0; r < in; ++r) {
            for (Eigen::Index c = 0; c < out; ++c) layer.weight(r, c) = bound * (2.0 * uni() - 1.0);
        }
        for (Eigen::Index c = 0; c < out; ++c) layer.bias(c) = bound * (2.0 * uni() - 1.0);
        layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
}

Mlp Mlp::zeros(std::span<const std::size_t> widths) {
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(widths[l]);
        const auto out = static_cast<Eigen::Index>(widths[l + 1]);
        layers.push_back({Eigen::MatrixXd::Zero(in, out), Eigen::VectorXd::Zero(out)});
    }
    return Mlp(std::move(layers));
}

std::size_t Mlp::input_width() const { return static_cast<std::size_t>(layers_.front().weight.rows()); }
std::size_t Mlp::output_width() const { return static_cast<std::size_t>(layers_.back().weight.cols()); }

std::vector<std::size_t> Mlp::widths() const {
    std::vector<std::size_t> w{input_width()};
    for (const auto& l : layers_) w.push_back(static_cast<std::size_t>(l.weight.cols()));
    return w;
}

RowMatrix Mlp::forward(const RowMatrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != input_width()) {
        throw Error(ErrorKind::Shape, "feature width " + std::to_string(x.cols()) + " does not match network input " +
                                          std::to_string(input_width()));
    }
    RowMatrix h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        RowMatrix z = h * layers_[l].weight;
        z.rowwise() += layers_[l].bias.transpose();
        if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
        h = std::move(z);
    }
    return h;
}

RowMatrix Mlp::forward(const RowMatrix& x, Tape& tape) const {
    if (static_cast<std::size_t>(x.cols()) != input_width()) {
        throw Error(ErrorKind::Shape, "feature width does not match network input");
    }
    tape.inputs.resize(layers_.size());
    tape.pre.resize(layers_.size());
    tape.inputs[0] = x;
    RowMatrix out;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        RowMatrix z = tape.inputs[l] * layers_[l].weight;
        z.rowwise() += layers_[l].bias.transpose();
        if (l + 1 < layers_.size()) {
            tape.inputs[l + 1] = z.cwiseMax(0.0);
            tape.pre[l] = std::move(z);
        } else {
            out = std::move(z);
        }
    }
    return out;
}

std::vector<double> Mlp::forward(std::span<const double> features) const {
    RowMatrix x(1, static_cast<Eigen::Index>(features.size()));
    for (std::size_t k = 0; k < features.size(); ++k) x(0, static_cast<Eigen::Index>(k)) = features[k];
    const RowMatrix y = forward(x);
    return {y.data(), y.data() + y.size()};
}

std::size_t Mlp::n_params() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

// Layout per layer: weight in row-major (fan_in x fan_out), then bias.
std::vector<double> Mlp::flatten() const {
    std::vector<double> out;
    out.reserve(n_params());
    for (const auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
        }
        for (Eigen::Index c = 0; c < l.bias.size(); ++c) out.push_back(l.bias(c));
    }
    return out;
}

void Mlp::unflatten(std::span<const double> params) {
    if (params.size() != n_params()) throw Error(ErrorKind::Shape, "parameter vector length mismatch");
    std::size_t k = 0;
    for (auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = params[k++];
        }
        for (Eigen::Index c = 0; c < l.bias.size(); ++c) l.bias(c) = params[k++];
    }
}

void Mlp::backward(const Tape& tape, const RowMatrix& d_out, std::span<double> grad) const {
    if (grad.size() < n_params()) throw Error(ErrorKind::Shape, "gradient buffer too small");
    std::vector<std::size_t> offsets(layers_.size());
    std::size_t off = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        offsets[l] = off;
        off += static_cast<std::size_t>(layers_[l].weight.size() + layers_[l].bias.size());
    }
    RowMatrix delta = d_out;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& layer = layers_[l];
        const Eigen::Index in = layer.weight.rows();
        const Eigen::Index out = layer.weight.cols();
        // Row-major fan_in x fan_out block matches the flattened layout.
        Eigen::Map<RowMatrix> gw(grad.data() + offsets[l], in, out);
        gw.noalias() += tape.inputs[l].transpose() * delta;
        Eigen::Map<Eigen::RowVectorXd> gb(grad.data() + offsets[l] + static_cast<std::size_t>(in * out), out);
        gb += delta.colwise().sum();
        if (l == 0) break;
        RowMatrix prev = delta * layer.weight.transpose();
        // ReLU subgradient is 0 at the kink.
        prev = prev.cwiseProduct((tape.pre[l - 1].array() > 0.0).cast<double>().matrix());
        delta = std::move(prev);
    }
}

RowMatrix Policy::normalise(const RowMatrix& features) const {
    RowMatrix x = features;
    if (in_shift.size() == x.cols()) x.rowwise() -= in_shift;
    if (in_scale.size() == x.cols()) x.array().rowwise() *= in_scale.array();
    return x;
}

RowMatrix Policy::act(const RowMatrix& features, std::span<const std::size_t> steps) const {
    if (steps.size() != static_cast<std::size_t>(features.rows())) {
        throw Error(ErrorKind::Shape, "one step index per feature row required");
    }
    RowMatrix a = mlp.forward(normalise(features));
    a.array().rowwise() *= out_scale.array();
    if (step_bias.size() > 0) {
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            const auto t = static_cast<Eigen::Index>(steps[static_cast<std::size_t>(r)]);
            if (t >= step_bias.rows()) throw Error(ErrorKind::Shape, "step beyond the policy horizon");
            a.row(r) += step_bias.row(t);
        }
    }
    return a;
}

std::vector<double> Policy::act(std::span<const double> features, std::size_t step) const {
    RowMatrix x(1, static_cast<Eigen::Index>(features.size()));
    for (std::size_t k = 0; k < features.size(); ++k) x(0, static_cast<Eigen::Index>(k)) = features[k];
    const std::size_t steps[1] = {step};
    const RowMatrix a = act(x, steps);
    return {a.data(), a.data() + a.size()};
}

std::vector<double> Policy::flatten() const {
    std::vector<double> out = mlp.flatten();
    out.insert(out.end(), step_bias.data(), step_bias.data() + step_bias.size());
    return out;
}

void Policy::unflatten(std::span<const double> params) {
    const std::size_t np = mlp.n_params();
    if (params.size() != n_params()) throw Error(ErrorKind::Shape, "parameter vector length mismatch");
    mlp.unflatten(params.first(np));
    std::copy(params.begin() + static_cast<std::ptrdiff_t>(np), params.end(), step_bias.data());
}

}  // namespace driftless
