#pragma once

#include <string>

#include "povsat/errors.hpp"
#include "povsat/nn.hpp"

namespace povsat {

// SGD with momentum: v <- mu * v + g, p <- p - eta * v.
struct SgdMomentumState {
    double learning_rate = 1e-7;
    double momentum = 0.9;
    ParamSet velocity;  // zero-initialized, shaped like the model's parameters

    SgdMomentumState() = default;
    SgdMomentumState(double lr, double mu, const MlpRegressor& model)
        : learning_rate(lr), momentum(mu), velocity(model.zeros_like()) {
        if (lr < 0.0) throw ConfigError("learning rate must be >= 0");
        if (mu < 0.0 || mu >= 1.0) throw ConfigError("momentum must be in [0, 1)");
    }
};

// Elementwise update rule, exposed for direct testing.
inline void sgd_update(double& param, double& velocity, double grad, double lr, double mu) {
    velocity = mu * velocity + grad;
    param -= lr * velocity;
}

// One optimizer step over all model parameters. Parameters land back on the
// 32-bit float grid; velocity stays at full precision.
inline void sgd_step(MlpRegressor& model, SgdMomentumState& state, const ParamSet& grads) {
    if (grads.weights.size() != model.layers.size() || state.velocity.weights.size() != model.layers.size())
        throw ShapeError("sgd_step: layer count mismatch");
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        auto& layer = model.layers[li];
        const Matrix& gw = grads.weights[li];
        Matrix& vw = state.velocity.weights[li];
        if (!gw.same_shape(layer.weights) || !vw.same_shape(layer.weights))
            throw ShapeError("sgd_step: weight shape mismatch in layer " + std::to_string(li));
        for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
            sgd_update(layer.weights.data[i], vw.data[i], gw.data[i], state.learning_rate, state.momentum);
            layer.weights.data[i] = to_f32_grid(layer.weights.data[i]);
        }

        const auto& gb = grads.biases[li];
        auto& vb = state.velocity.biases[li];
        if (gb.size() != layer.bias.size() || vb.size() != layer.bias.size())
            throw ShapeError("sgd_step: bias shape mismatch in layer " + std::to_string(li));
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            sgd_update(layer.bias[i], vb[i], gb[i], state.learning_rate, state.momentum);
            layer.bias[i] = to_f32_grid(layer.bias[i]);
        }
    }
}

}  // namespace povsat
