#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "povsat/errors.hpp"
#include "povsat/matrix.hpp"
#include "povsat/rng.hpp"

namespace povsat {

enum class Activation : std::uint32_t {
    Identity = 0,
    Relu = 1,
};

inline std::string activation_name(Activation a) {
    return a == Activation::Relu ? "relu" : "identity";
}

// Parameters are kept on the 32-bit float grid (stored as doubles) so that
// checkpoints, which serialize 32-bit values, round-trip bit-exactly. All
// arithmetic on them runs in double.
inline double to_f32_grid(double v) { return static_cast<double>(static_cast<float>(v)); }

struct LinearLayer {
    Matrix weights;             // out x in
    std::vector<double> bias;   // out

    LinearLayer() = default;
    LinearLayer(std::size_t out, std::size_t in) : weights(out, in), bias(out, 0.0) {}

    std::size_t fan_in() const { return weights.cols; }
    std::size_t fan_out() const { return weights.rows; }
};

// Gradient / velocity buffers shaped exactly like a model's parameters.
struct ParamSet {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    bool all_finite() const {
        for (const auto& w : weights)
            if (!w.all_finite()) return false;
        for (const auto& b : biases)
            for (double v : b)
                if (!std::isfinite(v)) return false;
        return true;
    }
};

// Fully connected regressor: flatten -> hidden layers (activation) -> scalar.
struct MlpRegressor {
    std::vector<LinearLayer> layers;
    Activation activation = Activation::Relu;
    std::size_t input_dim = 0;

    std::size_t num_layers() const { return layers.size(); }

    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims{input_dim};
        for (const auto& l : layers) dims.push_back(l.fan_out());
        return dims;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weights.size() + l.bias.size();
        return n;
    }

    ParamSet zeros_like() const {
        ParamSet p;
        for (const auto& l : layers) {
            p.weights.emplace_back(l.weights.rows, l.weights.cols);
            p.biases.emplace_back(l.bias.size(), 0.0);
        }
        return p;
    }
};

// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero, fully
// determined by the seed. hidden_dims may be empty (single linear layer).
inline MlpRegressor init_model(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                               std::uint64_t seed) {
    if (input_dim < 1) throw ConfigError("init_model: input_dim must be >= 1");
    for (std::size_t h : hidden_dims)
        if (h < 1) throw ConfigError("init_model: hidden dims must be >= 1");

    MlpRegressor model;
    model.input_dim = input_dim;
    model.activation = Activation::Relu;

    std::vector<std::size_t> dims{input_dim};
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(1);

    Rng rng(seed);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        LinearLayer layer(dims[i + 1], dims[i]);
        const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
        float fbound = static_cast<float>(bound);
        if (static_cast<double>(fbound) > bound) fbound = std::nextafterf(fbound, 0.0f);
        for (double& w : layer.weights.data) {
            float f = static_cast<float>(rng.uniform(-bound, bound));
            if (f > fbound) f = fbound;
            if (f < -fbound) f = -fbound;
            w = static_cast<double>(f);
        }
        model.layers.push_back(std::move(layer));
    }
    return model;
}

inline void check_model_input(const MlpRegressor& model, std::size_t dim) {
    if (dim != model.input_dim)
        throw ShapeError("input has dim " + std::to_string(dim) + ", model expects " +
                         std::to_string(model.input_dim));
}

// z = X * W^T + b, rows are examples.
inline void affine_batch(const LinearLayer& layer, const Matrix& x, Matrix& z) {
    matmul_transB(x, layer.weights, z);
    for (std::size_t r = 0; r < z.rows; ++r) {
        double* row = z.row(r);
        for (std::size_t c = 0; c < z.cols; ++c) row[c] += layer.bias[c];
    }
}

inline void relu_inplace(Matrix& m) {
    for (double& v : m.data)
        if (v < 0.0) v = 0.0;
}

// Activations per layer, kept for backprop. act[0] is the input batch.
struct ForwardCache {
    std::vector<Matrix> act;
};

inline std::vector<double> forward_batch(const MlpRegressor& model, const Matrix& x,
                                         ForwardCache* cache = nullptr) {
    check_model_input(model, x.cols);
    if (x.rows == 0) throw ShapeError("forward_batch: empty batch");
    if (!x.all_finite()) throw NonFiniteError("forward_batch: non-finite input");

    if (cache != nullptr) {
        cache->act.clear();
        cache->act.push_back(x);
    }
    Matrix cur = x;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        Matrix z;
        affine_batch(model.layers[i], cur, z);
        const bool hidden = i + 1 < model.layers.size();
        if (hidden && model.activation == Activation::Relu) relu_inplace(z);
        if (cache != nullptr) cache->act.push_back(z);
        cur = std::move(z);
    }
    std::vector<double> preds(cur.rows);
    for (std::size_t r = 0; r < cur.rows; ++r) {
        preds[r] = cur(r, 0);
        if (!std::isfinite(preds[r])) throw NonFiniteError("forward_batch: non-finite prediction");
    }
    return preds;
}

// Scalar prediction for one feature vector. Pure function of (model, x).
inline double forward(const MlpRegressor& model, std::span<const double> x) {
    check_model_input(model, x.size());
    Matrix xm(1, x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xm(0, i) = x[i];
    return forward_batch(model, xm)[0];
}

// L = 1/n * sum((y_i - yhat_i)^2)
inline double mse_loss(std::span<const double> preds, std::span<const double> targets) {
    if (preds.size() != targets.size()) throw ShapeError("mse_loss: length mismatch");
    if (preds.empty()) throw ShapeError("mse_loss: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double d = preds[i] - targets[i];
        acc += d * d;
    }
    return acc / static_cast<double>(preds.size());
}

struct BackwardResult {
    ParamSet grads;
    double loss = 0.0;
    std::vector<double> preds;
};

// Gradients of the mean squared error over the batch with respect to every
// parameter. ReLU uses the zero subgradient at the kink.
inline BackwardResult backward(const MlpRegressor& model, const Matrix& x,
                               std::span<const double> targets) {
    if (x.rows != targets.size()) throw ShapeError("backward: batch size mismatch");
    ForwardCache cache;
    BackwardResult out;
    out.preds = forward_batch(model, x, &cache);
    out.loss = mse_loss(out.preds, targets);
    out.grads = model.zeros_like();

    const std::size_t n = x.rows;
    const std::size_t L = model.layers.size();

    // dL/d(output) = 2 * (yhat - y) / n
    Matrix delta(n, 1);
    for (std::size_t r = 0; r < n; ++r) delta(r, 0) = 2.0 * (out.preds[r] - targets[r]) / static_cast<double>(n);

    for (std::size_t li = L; li-- > 0;) {
        const Matrix& input_act = cache.act[li];
        // dW = delta^T * input, db = column sums of delta
        matmul_transA_accum(delta, input_act, out.grads.weights[li]);
        auto& db = out.grads.biases[li];
        for (std::size_t r = 0; r < delta.rows; ++r) {
            const double* drow = delta.row(r);
            for (std::size_t c = 0; c < delta.cols; ++c) db[c] += drow[c];
        }
        if (li == 0) break;
        // delta_prev = (delta * W) gated by the activation derivative.
        Matrix prev;
        matmul(delta, model.layers[li].weights, prev);
        if (model.activation == Activation::Relu) {
            const Matrix& act = cache.act[li];  // post-activation output of layer li-1
            for (std::size_t i = 0; i < prev.data.size(); ++i)
                if (act.data[i] <= 0.0) prev.data[i] = 0.0;
        }
        delta = std::move(prev);
    }

    if (!out.grads.all_finite()) throw NonFiniteError("backward: non-finite gradient");
    return out;
}

}  // namespace povsat
