#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "povsat/augment.hpp"
#include "povsat/checkpoint.hpp"
#include "povsat/errors.hpp"
#include "povsat/image.hpp"
#include "povsat/manifest.hpp"
#include "povsat/nn.hpp"
#include "povsat/optimizer.hpp"
#include "povsat/rng.hpp"
#include "povsat/util.hpp"

namespace povsat {

struct TrainConfig {
    TileKind modality = TileKind::Night;
    double learning_rate = 1e-7;
    double momentum = 0.9;
    int epochs = 10;
    int batch_size = 32;
    std::optional<AugmentationConfig> augmentation;
    std::uint64_t seed = 0;

    void validate() const {
        // learning_rate 0 is allowed so tests can freeze a model in place
        if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
        if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (augmentation.has_value()) augmentation->validate();
    }
};

inline TrainConfig default_train_config(TileKind modality) {
    TrainConfig cfg;
    cfg.modality = modality;
    cfg.learning_rate = modality == TileKind::Night ? 1e-7 : 1e-9;
    return cfg;
}

// One training/evaluation example: a tile and its normalized wealth label.
struct LabeledExample {
    std::string id;
    ImageTile tile;
    double label = 0.0;
};

struct EvalResult {
    double rmse = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n_examples = 0;
    std::size_t n_resamples = 0;
};

inline double rmse(std::span<const double> preds, std::span<const double> targets) {
    return std::sqrt(mse_loss(preds, targets));
}

namespace detail {

// q-quantile of a sorted sample, linear interpolation between order statistics.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw ShapeError("quantile of empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace detail

// Percentile bootstrap over example-level resamples: draws indices with
// replacement n_resamples times, computes the RMSE of each resample, and
// returns the (1-level)/2 and 1-(1-level)/2 quantiles. Resample r uses an
// RNG substream keyed by (seed, r), so parallel evaluation is bit-identical
// to sequential.
inline std::pair<double, double> bootstrap_ci(std::span<const double> preds,
                                              std::span<const double> targets,
                                              std::size_t n_resamples, double level,
                                              std::uint64_t seed) {
    if (preds.size() != targets.size()) throw ShapeError("bootstrap_ci: length mismatch");
    if (preds.empty()) throw ShapeError("bootstrap_ci: empty input");
    if (n_resamples < 1) throw ConfigError("bootstrap_ci: need at least one resample");
    if (level <= 0.0 || level >= 1.0) throw ConfigError("bootstrap_ci: level must be in (0, 1)");

    const std::size_t n = preds.size();
    std::vector<double> sq_errors(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = preds[i] - targets[i];
        sq_errors[i] = d * d;
    }

    std::vector<double> stats(n_resamples);
    parallel_for(n_resamples, [&](std::size_t r) {
        Rng rng(derive_seed(seed, "resample", r));
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += sq_errors[rng.below(n)];
        stats[r] = std::sqrt(acc / static_cast<double>(n));
    });
    std::sort(stats.begin(), stats.end());

    const double alpha = (1.0 - level) / 2.0;
    return {detail::quantile_sorted(stats, alpha), detail::quantile_sorted(stats, 1.0 - alpha)};
}

namespace detail {

inline Matrix features_matrix(std::span<const LabeledExample> examples, std::size_t input_dim) {
    Matrix x(examples.size(), input_dim);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto f = flatten(examples[i].tile);
        if (f.size() != input_dim)
            throw ShapeError("example '" + examples[i].id + "' flattens to " +
                             std::to_string(f.size()) + " features, model expects " +
                             std::to_string(input_dim));
        std::copy(f.begin(), f.end(), x.row(i));
    }
    return x;
}

// Chunked batch forward; each prediction depends only on its own row, so the
// result is identical for any thread count.
inline std::vector<double> predict_all(const MlpRegressor& model, const Matrix& x) {
    const unsigned threads = std::min<std::size_t>(thread_cap(), x.rows);
    if (threads <= 1) return forward_batch(model, x);

    std::vector<double> preds(x.rows);
    const std::size_t chunk = (x.rows + threads - 1) / threads;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t start = 0; start < x.rows; start += chunk)
        ranges.emplace_back(start, std::min(x.rows, start + chunk));
    parallel_for(ranges.size(), [&](std::size_t ri) {
        const auto [start, stop] = ranges[ri];
        Matrix sub(stop - start, x.cols);
        std::copy(x.row(start), x.row(start) + (stop - start) * x.cols, sub.data.begin());
        const auto p = forward_batch(model, sub);
        std::copy(p.begin(), p.end(), preds.begin() + static_cast<std::ptrdiff_t>(start));
    });
    return preds;
}

}  // namespace detail

struct EpochRecord {
    int epoch = 0;  // 1-based
    Checkpoint checkpoint;
    double tune_rmse = 0.0;
};

struct TrainOutput {
    std::vector<EpochRecord> epochs;
    std::size_t selected_index = 0;
    double initial_tune_rmse = 0.0;  // tune RMSE of the untrained model

    const EpochRecord& selected() const { return epochs.at(selected_index); }
};

// Trains for exactly config.epochs epochs of seeded-shuffle mini-batches,
// snapshots a checkpoint with its tune RMSE after every epoch, and selects
// the earliest epoch with the smallest tune RMSE. Augmentation, when
// configured, touches only training examples.
inline TrainOutput train(MlpRegressor model, std::span<const LabeledExample> train_set,
                         std::span<const LabeledExample> tune_set, const TrainConfig& config) {
    config.validate();
    if (train_set.empty()) throw ConfigError("train: empty training set");
    if (tune_set.empty()) throw ConfigError("train: empty tune set");

    const std::size_t input_dim = model.input_dim;
    const Matrix tune_x = detail::features_matrix(tune_set, input_dim);
    std::vector<double> tune_y(tune_set.size());
    for (std::size_t i = 0; i < tune_set.size(); ++i) tune_y[i] = tune_set[i].label;

    std::vector<double> train_y(train_set.size());
    for (std::size_t i = 0; i < train_set.size(); ++i) train_y[i] = train_set[i].label;

    // Without augmentation the features never change; flatten once.
    std::optional<Matrix> static_features;
    if (!config.augmentation.has_value())
        static_features = detail::features_matrix(train_set, input_dim);
    else
        detail::features_matrix(train_set.subspan(0, 1), input_dim);  // early dim check

    const auto tune_rmse_of = [&](const MlpRegressor& m) {
        const auto preds = forward_batch(m, tune_x);
        return rmse(preds, tune_y);
    };

    TrainOutput out;
    out.initial_tune_rmse = tune_rmse_of(model);

    SgdMomentumState state(config.learning_rate, config.momentum, model);
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng order_rng(derive_seed(config.seed, "epoch-order", static_cast<std::uint64_t>(epoch)));
        order_rng.shuffle(order);

        try {
            for (std::size_t start = 0; start < order.size(); start += batch) {
                const std::size_t stop = std::min(order.size(), start + batch);
                Matrix x(stop - start, input_dim);
                std::vector<double> y(stop - start);
                for (std::size_t i = start; i < stop; ++i) {
                    const std::size_t idx = order[i];
                    y[i - start] = train_y[idx];
                    if (static_features.has_value()) {
                        std::copy(static_features->row(idx), static_features->row(idx) + input_dim,
                                  x.row(i - start));
                    } else {
                        const auto& aug = *config.augmentation;
                        Rng ex_rng(derive_seed(derive_seed(aug.seed, train_set[idx].id),
                                               "epoch", static_cast<std::uint64_t>(epoch)));
                        const auto f = flatten(augment(train_set[idx].tile, aug, ex_rng));
                        std::copy(f.begin(), f.end(), x.row(i - start));
                    }
                }
                const auto res = backward(model, x, y);
                if (!std::isfinite(res.loss)) throw NonFiniteError("non-finite batch loss");
                sgd_step(model, state, res.grads);
            }

            const double tune_rmse_epoch = tune_rmse_of(model);
            out.epochs.push_back(
                {epoch, checkpoint_from_model(model, static_cast<std::uint32_t>(epoch),
                                              static_cast<float>(tune_rmse_epoch)),
                 tune_rmse_epoch});
        } catch (const NonFiniteError&) {
            throw DivergenceError(epoch);
        }
    }

    out.selected_index = 0;
    for (std::size_t i = 1; i < out.epochs.size(); ++i)
        if (out.epochs[i].tune_rmse < out.epochs[out.selected_index].tune_rmse)
            out.selected_index = i;
    return out;
}

// Test-set evaluation of a checkpoint: RMSE plus its 95% percentile
// bootstrap CI. No augmentation is ever applied here.
inline EvalResult evaluate(const Checkpoint& checkpoint, std::span<const LabeledExample> test_set,
                           std::uint64_t seed, std::size_t n_resamples = 1000) {
    if (test_set.empty()) throw ShapeError("evaluate: empty test set");
    const MlpRegressor model = model_from_checkpoint(checkpoint);
    const Matrix x = detail::features_matrix(test_set, model.input_dim);
    std::vector<double> y(test_set.size());
    for (std::size_t i = 0; i < test_set.size(); ++i) y[i] = test_set[i].label;

    const auto preds = detail::predict_all(model, x);
    EvalResult result;
    result.rmse = rmse(preds, y);
    const auto [lo, hi] = bootstrap_ci(preds, y, n_resamples, 0.95, seed);
    result.ci_low = lo;
    result.ci_high = hi;
    result.n_examples = test_set.size();
    result.n_resamples = n_resamples;
    return result;
}

}  // namespace povsat
