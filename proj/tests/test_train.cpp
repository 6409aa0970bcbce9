#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "povsat/synth.hpp"
#include "povsat/train.hpp"

using namespace povsat;

namespace {

// Constant-valued tiles make exact predictions easy to construct.
LabeledExample const_example(std::string id, std::uint8_t value, double label,
                             std::size_t size = 4) {
    LabeledExample ex;
    ex.id = std::move(id);
    ex.tile = make_tile(ex.id, TileKind::Night, size, size);
    for (auto& p : ex.tile.pixels) p = value;
    ex.label = label;
    return ex;
}

// A model that always predicts `value` exactly (zero weights, output bias).
Checkpoint constant_predictor(std::size_t input_dim, float value) {
    MlpRegressor m = init_model(input_dim, {}, 0);
    for (double& w : m.layers[0].weights.data) w = 0.0;
    m.layers[0].bias[0] = static_cast<double>(value);
    return checkpoint_from_model(m, 1, 0.0f);
}

std::vector<LabeledExample> load_split(const DatasetManifest& m, Split split, TileKind kind,
                                       std::size_t limit) {
    std::vector<LabeledExample> out;
    for (const auto& row : m.rows) {
        if (row.split != split) continue;
        out.push_back({row.id,
                       read_tile(m.resolve(row.tile_path(kind)), kind, row.id, row.lat, row.lon),
                       row.norm_wealth});
        if (out.size() >= limit) break;
    }
    return out;
}

}  // namespace

TEST_CASE("rmse hand values and the rmse^2 = mse identity") {
    const std::vector<double> same{1.0, 2.0};
    CHECK(rmse(same, same) == 0.0);
    const std::vector<double> zeros{0.0, 0.0}, pm{1.0, -1.0};
    CHECK(rmse(zeros, pm) == doctest::Approx(1.0));
    const std::vector<double> one{1.0}, four{4.0};
    CHECK(rmse(one, four) == doctest::Approx(3.0));

    Rng gen(12);
    for (int i = 0; i < 30; ++i) {
        std::vector<double> a(10), b(10);
        for (auto& v : a) v = gen.uniform(-3, 3);
        for (auto& v : b) v = gen.uniform(-3, 3);
        const double r = rmse(a, b), m = mse_loss(a, b);
        CHECK(std::abs(r * r - m) <= 1e-12 * std::max(1.0, m));
    }
}

TEST_CASE("bootstrap CI of a perfect predictor is (0, 0)") {
    const std::vector<double> preds{0.5, -1.0, 2.0}, targets = preds;
    const auto [lo, hi] = bootstrap_ci(preds, targets, 1000, 0.95, 7);
    CHECK(lo == 0.0);
    CHECK(hi == 0.0);
}

TEST_CASE("bootstrap CI of a single example collapses to its error") {
    const std::vector<double> preds{2.0}, targets{0.0};
    const auto [lo, hi] = bootstrap_ci(preds, targets, 1000, 0.95, 7);
    CHECK(lo == doctest::Approx(2.0));
    CHECK(hi == doctest::Approx(2.0));
}

TEST_CASE("bootstrap CI over two examples stays inside the enumerable range") {
    // errors {0, 2}: every resample RMSE is one of {0, sqrt(2), 2}
    const std::vector<double> preds{1.0, 3.0}, targets{1.0, 1.0};
    const auto [lo, hi] = bootstrap_ci(preds, targets, 1000, 0.95, 11);
    CHECK(lo >= 0.0);
    CHECK(hi <= 2.0);
    CHECK(lo <= hi);

    const auto [lo2, hi2] = bootstrap_ci(preds, targets, 1000, 0.95, 11);
    CHECK(lo == lo2);  // deterministic for a seed
    CHECK(hi == hi2);
}

TEST_CASE("bootstrap CI width shrinks with sample size (majority of trials)") {
    int narrower = 0;
    for (int trial = 0; trial < 10; ++trial) {
        Rng gen(1000 + trial);
        std::vector<double> p100(100), t100(100, 0.0), p400(400), t400(400, 0.0);
        for (auto& v : p100) v = gen.normal(0.0, 1.0);
        for (auto& v : p400) v = gen.normal(0.0, 1.0);
        const auto [lo1, hi1] = bootstrap_ci(p100, t100, 1000, 0.95, 50 + trial);
        const auto [lo4, hi4] = bootstrap_ci(p400, t400, 1000, 0.95, 90 + trial);
        if (hi4 - lo4 < hi1 - lo1) ++narrower;
    }
    CHECK(narrower >= 6);
}

TEST_CASE("bootstrap CI rejects empty input") {
    const std::vector<double> empty;
    CHECK_THROWS_AS(bootstrap_ci(empty, empty, 1000, 0.95, 1), ShapeError);
}

TEST_CASE("train with learning rate zero keeps every checkpoint at initialization") {
    std::vector<LabeledExample> train_set, tune_set;
    for (int i = 0; i < 8; ++i)
        train_set.push_back(const_example("tr" + std::to_string(i), 100 + i, 0.1 * i));
    for (int i = 0; i < 3; ++i)
        tune_set.push_back(const_example("tu" + std::to_string(i), 90 + i, 0.2 * i));

    const auto model = init_model(16, {6}, 3);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 4;
    cfg.batch_size = 3;
    const auto out = train(model, train_set, tune_set, cfg);

    REQUIRE(out.epochs.size() == 4);
    const auto init_ckpt = checkpoint_from_model(model, 0, 0.0f);
    for (const auto& rec : out.epochs) {
        CHECK(rec.checkpoint.params == init_ckpt.params);
        CHECK(rec.tune_rmse == doctest::Approx(out.initial_tune_rmse));
    }
    // identical tune RMSEs: the tie breaks to the earliest epoch
    CHECK(out.selected().epoch == 1);
}

TEST_CASE("checkpoint selection never picks a beatable epoch") {
    std::vector<LabeledExample> train_set, tune_set;
    Rng gen(77);
    for (int i = 0; i < 20; ++i) {
        auto ex = const_example("tr" + std::to_string(i), static_cast<std::uint8_t>(gen.below(256)),
                                gen.uniform(-1, 1));
        train_set.push_back(ex);
    }
    for (int i = 0; i < 5; ++i)
        tune_set.push_back(const_example("tu" + std::to_string(i),
                                         static_cast<std::uint8_t>(gen.below(256)),
                                         gen.uniform(-1, 1)));
    const auto model = init_model(16, {4}, 9);
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 6;
    const auto out = train(model, train_set, tune_set, cfg);
    for (const auto& rec : out.epochs) CHECK(out.selected().tune_rmse <= rec.tune_rmse);
}

TEST_CASE("train is deterministic given seed and data order") {
    std::vector<LabeledExample> train_set, tune_set;
    for (int i = 0; i < 10; ++i)
        train_set.push_back(const_example("tr" + std::to_string(i), 3 * i, 0.05 * i));
    for (int i = 0; i < 4; ++i)
        tune_set.push_back(const_example("tu" + std::to_string(i), 5 * i, -0.1 * i));

    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 3;
    cfg.seed = 21;
    const auto a = train(init_model(16, {5}, 2), train_set, tune_set, cfg);
    const auto b = train(init_model(16, {5}, 2), train_set, tune_set, cfg);
    REQUIRE(a.epochs.size() == b.epochs.size());
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
        CHECK(serialize_checkpoint(a.epochs[i].checkpoint) ==
              serialize_checkpoint(b.epochs[i].checkpoint));
        CHECK(a.epochs[i].tune_rmse == b.epochs[i].tune_rmse);
    }
}

TEST_CASE("train reports divergence with the failing epoch") {
    std::vector<LabeledExample> train_set, tune_set;
    for (int i = 0; i < 6; ++i)
        train_set.push_back(const_example("tr" + std::to_string(i), 200, 1.5));
    tune_set.push_back(const_example("tu0", 100, 0.0));

    TrainConfig cfg;
    cfg.learning_rate = 1e18;  // guaranteed blowup
    cfg.epochs = 3;
    try {
        train(init_model(16, {8}, 1), train_set, tune_set, cfg);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch() >= 1);
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("train rejects empty sets and mismatched dims") {
    std::vector<LabeledExample> train_set{const_example("a", 1, 0.0)}, empty;
    TrainConfig cfg;
    CHECK_THROWS_AS(train(init_model(16, {2}, 1), empty, train_set, cfg), ConfigError);
    CHECK_THROWS_AS(train(init_model(16, {2}, 1), train_set, empty, cfg), ConfigError);
    CHECK_THROWS_AS(train(init_model(9, {2}, 1), train_set, train_set, cfg), ShapeError);
}

TEST_CASE("augmentation leaves tune evaluation untouched (lr = 0 probe)") {
    std::vector<LabeledExample> train_set, tune_set;
    Rng gen(31);
    for (int i = 0; i < 6; ++i) {
        auto ex = const_example("tr" + std::to_string(i), 0, 0.3);
        for (auto& p : ex.tile.pixels) p = static_cast<std::uint8_t>(gen.below(256));
        train_set.push_back(ex);
    }
    for (int i = 0; i < 3; ++i) {
        auto ex = const_example("tu" + std::to_string(i), 0, -0.4);
        for (auto& p : ex.tile.pixels) p = static_cast<std::uint8_t>(gen.below(256));
        tune_set.push_back(ex);
    }

    TrainConfig plain;
    plain.learning_rate = 0.0;
    plain.epochs = 2;
    TrainConfig with_aug = plain;
    with_aug.augmentation = AugmentationConfig{};
    with_aug.augmentation->seed = 5;

    const auto model = init_model(16, {4}, 8);
    const auto a = train(model, train_set, tune_set, plain);
    const auto b = train(model, train_set, tune_set, with_aug);
    // lr = 0: parameters never move, so any tune difference could only come
    // from augmentation leaking into the tune path
    CHECK(a.initial_tune_rmse == b.initial_tune_rmse);
    for (std::size_t i = 0; i < a.epochs.size(); ++i)
        CHECK(a.epochs[i].tune_rmse == b.epochs[i].tune_rmse);
}

TEST_CASE("evaluate: perfect and constant predictors") {
    std::vector<LabeledExample> test_set;
    for (int i = 0; i < 5; ++i) test_set.push_back(const_example("t" + std::to_string(i), 7 * i, 0.5));
    const auto perfect = constant_predictor(16, 0.5f);
    const auto res = evaluate(perfect, test_set, 3);
    CHECK(res.rmse == 0.0);
    CHECK(res.ci_low == 0.0);
    CHECK(res.ci_high == 0.0);
    CHECK(res.n_examples == 5);
    CHECK(res.n_resamples == 1000);

    std::vector<LabeledExample> pm{const_example("a", 10, 2.0), const_example("b", 20, -2.0)};
    const auto zero = constant_predictor(16, 0.0f);
    CHECK(evaluate(zero, pm, 3).rmse == doctest::Approx(2.0));

    const auto r1 = evaluate(zero, pm, 3);
    const auto r2 = evaluate(zero, pm, 3);
    CHECK(r1.rmse == r2.rmse);
    CHECK(r1.ci_low == r2.ci_low);
    CHECK(r1.ci_high == r2.ci_high);

    CHECK(r1.ci_low <= r1.rmse);
    CHECK(r1.rmse <= r1.ci_high);

    const auto wrong_dims = constant_predictor(9, 0.0f);
    CHECK_THROWS_AS(evaluate(wrong_dims, pm, 3), ShapeError);
}

TEST_CASE("evaluation and bootstrap are bit-identical across thread counts") {
    std::vector<LabeledExample> test_set;
    Rng gen(88);
    for (int i = 0; i < 37; ++i) {
        auto ex = const_example("t" + std::to_string(i), 0, gen.uniform(-1, 1));
        for (auto& p : ex.tile.pixels) p = static_cast<std::uint8_t>(gen.below(256));
        test_set.push_back(ex);
    }
    const auto model = init_model(16, {8, 8}, 12);
    const auto ckpt = checkpoint_from_model(model, 1, 0.0f);

    setenv("POVSAT_THREADS", "1", 1);
    const auto serial = evaluate(ckpt, test_set, 5);
    setenv("POVSAT_THREADS", "3", 1);
    const auto parallel = evaluate(ckpt, test_set, 5);
    unsetenv("POVSAT_THREADS");

    CHECK(serial.rmse == parallel.rmse);
    CHECK(serial.ci_low == parallel.ci_low);
    CHECK(serial.ci_high == parallel.ci_high);
}

TEST_CASE("training on a planted signal beats the untrained model") {
    SynthConfig cfg;
    cfg.n_cities = 1000;
    cfg.image_size = 16;
    cfg.night_gain = 25.0;
    cfg.pixel_noise_sigma = 7.5;
    cfg.seed = 42;
    const auto dir = std::filesystem::temp_directory_path() / "povsat_train_world";
    std::filesystem::remove_all(dir);
    const auto manifest = generate_world(cfg, dir);

    const auto train_set = load_split(manifest, Split::Train, TileKind::Night, 800);
    const auto tune_set = load_split(manifest, Split::Tune, TileKind::Night, 100);
    REQUIRE(train_set.size() == 800);
    REQUIRE(tune_set.size() >= 50);

    const std::size_t input_dim = flatten(train_set[0].tile).size();
    TrainConfig tc = default_train_config(TileKind::Night);
    tc.learning_rate = 1e-2;  // tuned for the planted world
    tc.epochs = 3;
    tc.seed = 9;
    const auto out = train(init_model(input_dim, {512, 512}, 7), train_set, tune_set, tc);
    CHECK(out.selected().tune_rmse < out.initial_tune_rmse);
    std::filesystem::remove_all(dir);
}
