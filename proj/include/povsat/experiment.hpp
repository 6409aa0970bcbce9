#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "povsat/errors.hpp"
#include "povsat/manifest.hpp"
#include "povsat/synth.hpp"
#include "povsat/train.hpp"

namespace povsat {

// Declarative description of one experiment run.
struct ExperimentConfig {
    std::string name;
    TileKind modality = TileKind::Night;
    std::size_t train_size = 800;
    std::size_t test_size = 100;
    bool augmentation = false;
    std::optional<Continent> train_continent;
    std::optional<Continent> test_continent;
    std::uint64_t seed = 1;
    TrainConfig train;

    void validate() const {
        if (name.empty()) throw ConfigError("experiment needs a name");
        if (train_size < 1) throw ConfigError("train_size must be >= 1");
        if (test_size < 1) throw ConfigError("test_size must be >= 1");
        if ((train_continent.has_value() || test_continent.has_value()) &&
            modality != TileKind::Night)
            throw ConfigError("continent experiments run on nighttime imagery only");
        train.validate();
    }
};

inline ExperimentConfig make_experiment_config(std::string name, TileKind modality) {
    ExperimentConfig cfg;
    cfg.name = std::move(name);
    cfg.modality = modality;
    cfg.train = default_train_config(modality);
    return cfg;
}

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{
        "baseline-night", "baseline-day",
        "quantity-night-800", "quantity-night-1600", "quantity-night-2400",
        "quantity-day-800", "quantity-day-1600", "quantity-day-2400",
        "aug-night", "aug-day",
        "continent-africa-asia", "continent-europe-africa", "continent-asia-europe"};
    return names;
}

// The experiment families: baselines at 800 train / 100 test, the data
// quantity ladder 800/1600/2400, augmentation on/off, and the three
// night-only cross-continent transfers (Europe trains on 672).
inline ExperimentConfig preset(const std::string& name) {
    const auto night = [&] { return make_experiment_config(name, TileKind::Night); };
    const auto day = [&] { return make_experiment_config(name, TileKind::Day); };

    if (name == "baseline-night") return night();
    if (name == "baseline-day") return day();
    if (name == "quantity-night-800") return night();
    if (name == "quantity-day-800") return day();
    if (name == "quantity-night-1600") {
        auto cfg = night();
        cfg.train_size = 1600;
        return cfg;
    }
    if (name == "quantity-night-2400") {
        auto cfg = night();
        cfg.train_size = 2400;
        return cfg;
    }
    if (name == "quantity-day-1600") {
        auto cfg = day();
        cfg.train_size = 1600;
        return cfg;
    }
    if (name == "quantity-day-2400") {
        auto cfg = day();
        cfg.train_size = 2400;
        return cfg;
    }
    if (name == "aug-night" || name == "aug-day") {
        auto cfg = name == "aug-night" ? night() : day();
        cfg.augmentation = true;
        return cfg;
    }
    if (name == "continent-africa-asia") {
        auto cfg = night();
        cfg.train_continent = Continent::Africa;
        cfg.test_continent = Continent::Asia;
        return cfg;
    }
    if (name == "continent-europe-africa") {
        auto cfg = night();
        cfg.train_continent = Continent::Europe;
        cfg.test_continent = Continent::Africa;
        cfg.train_size = 672;
        return cfg;
    }
    if (name == "continent-asia-europe") {
        auto cfg = night();
        cfg.train_continent = Continent::Asia;
        cfg.test_continent = Continent::Europe;
        return cfg;
    }

    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "'; known presets: " + known);
}

struct ExperimentResult {
    ExperimentConfig config;
    EvalResult eval;
    double seconds = 0.0;
    int selected_epoch = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    Checkpoint selected_checkpoint;
};

namespace detail {

inline std::string sample_tag(const char* what, const std::optional<Continent>& filter) {
    return std::string(what) + ":" + (filter.has_value() ? continent_name(*filter) : "all");
}

// Seeded shuffle of all candidates; taking a prefix makes subsets nested
// across train sizes that share a seed.
inline std::vector<const ManifestRow*> sample_rows(const DatasetManifest& manifest, Split split,
                                                   const std::optional<Continent>& filter,
                                                   std::size_t count, std::uint64_t seed,
                                                   const std::string& tag, const char* what) {
    std::vector<const ManifestRow*> candidates;
    for (const auto& row : manifest.rows)
        if (row.split == split && (!filter.has_value() || row.continent == *filter))
            candidates.push_back(&row);
    std::sort(candidates.begin(), candidates.end(),
              [](const ManifestRow* a, const ManifestRow* b) { return a->id < b->id; });
    if (candidates.size() < count) throw ShortageError(what, count, candidates.size());

    Rng rng(derive_seed(seed, tag));
    rng.shuffle(candidates);
    candidates.resize(count);
    return candidates;
}

inline std::vector<LabeledExample> load_examples(const DatasetManifest& manifest,
                                                 const std::vector<const ManifestRow*>& rows,
                                                 TileKind kind) {
    std::vector<LabeledExample> out;
    out.reserve(rows.size());
    for (const ManifestRow* row : rows)
        out.push_back({row->id,
                       read_tile(manifest.resolve(row->tile_path(kind)), kind, row->id, row->lat,
                                 row->lon),
                       row->norm_wealth});
    return out;
}

}  // namespace detail

// Samples train/tune/test examples from the manifest, trains the default
// flatten -> 512 -> 512 -> 1 regressor, selects the best checkpoint by tune
// RMSE, and evaluates on a test set that is identical across configs sharing
// (test filter, seed).
inline ExperimentResult run_experiment(const ExperimentConfig& config,
                                       const DatasetManifest& manifest) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();

    const auto train_rows =
        detail::sample_rows(manifest, Split::Train, config.train_continent, config.train_size,
                            config.seed, detail::sample_tag("train-sample", config.train_continent),
                            "train examples");
    const auto test_rows =
        detail::sample_rows(manifest, Split::Test, config.test_continent, config.test_size,
                            config.seed, detail::sample_tag("test-sample", config.test_continent),
                            "test examples");

    // the whole tune split (filtered like the training data) drives selection
    std::vector<const ManifestRow*> tune_rows;
    for (const auto& row : manifest.rows)
        if (row.split == Split::Tune &&
            (!config.train_continent.has_value() || row.continent == *config.train_continent))
            tune_rows.push_back(&row);
    std::sort(tune_rows.begin(), tune_rows.end(),
              [](const ManifestRow* a, const ManifestRow* b) { return a->id < b->id; });
    if (tune_rows.empty()) throw ShortageError("tune examples", 1, 0);

    for (const ManifestRow* row : train_rows)
        if (config.train_continent.has_value() && row->continent != *config.train_continent)
            throw Error("train sample leaked a foreign continent");
    for (const ManifestRow* row : test_rows)
        if (config.test_continent.has_value() && row->continent != *config.test_continent)
            throw Error("test sample leaked a foreign continent");

    const TileKind kind = config.modality;
    const auto train_set = detail::load_examples(manifest, train_rows, kind);
    const auto tune_set = detail::load_examples(manifest, tune_rows, kind);
    const auto test_set = detail::load_examples(manifest, test_rows, kind);

    const std::size_t input_dim = flatten(train_set.front().tile).size();
    const MlpRegressor model = init_model(input_dim, {512, 512}, derive_seed(config.seed, "init"));

    TrainConfig tc = config.train;
    tc.modality = config.modality;
    tc.seed = derive_seed(config.seed, "train");
    if (config.augmentation) {
        if (!tc.augmentation.has_value()) tc.augmentation = AugmentationConfig{};
        tc.augmentation->seed = derive_seed(config.seed, "augment");
    } else {
        tc.augmentation.reset();
    }

    const TrainOutput trained = train(model, train_set, tune_set, tc);
    const EvalResult eval =
        evaluate(trained.selected().checkpoint, test_set, derive_seed(config.seed, "bootstrap"));

    ExperimentResult result;
    result.config = config;
    result.eval = eval;
    result.selected_epoch = trained.selected().epoch;
    result.selected_checkpoint = trained.selected().checkpoint;
    for (const auto* row : train_rows) result.train_ids.push_back(row->id);
    for (const auto* row : test_rows) result.test_ids.push_back(row->id);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

// ---- result rows and reports -----------------------------------------------

inline constexpr const char* kResultsHeader =
    "name,modality,train_size,test_size,augmented,train_continent,test_continent,"
    "rmse,ci_low,ci_high,selected_epoch,seed,seconds";

// Flat row of results.csv; what reports are built from.
struct ResultRow {
    std::string name;
    std::string modality;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    bool augmented = false;
    std::string train_continent;  // empty when unfiltered
    std::string test_continent;
    double rmse = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int selected_epoch = 0;
    std::uint64_t seed = 0;
    double seconds = 0.0;
};

inline ResultRow to_result_row(const ExperimentResult& r) {
    ResultRow row;
    row.name = r.config.name;
    row.modality = tile_kind_name(r.config.modality);
    row.train_size = r.config.train_size;
    row.test_size = r.config.test_size;
    row.augmented = r.config.augmentation;
    if (r.config.train_continent.has_value())
        row.train_continent = continent_name(*r.config.train_continent);
    if (r.config.test_continent.has_value())
        row.test_continent = continent_name(*r.config.test_continent);
    row.rmse = r.eval.rmse;
    row.ci_low = r.eval.ci_low;
    row.ci_high = r.eval.ci_high;
    row.selected_epoch = r.selected_epoch;
    row.seed = r.config.seed;
    row.seconds = r.seconds;
    return row;
}

inline std::string serialize_results_csv(std::vector<ResultRow> rows) {
    std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return a.name != b.name ? a.name < b.name : a.seed < b.seed;
    });
    std::string out = std::string(kResultsHeader) + "\n";
    for (const auto& r : rows) {
        out += r.name + "," + r.modality + "," + std::to_string(r.train_size) + "," +
               std::to_string(r.test_size) + "," + (r.augmented ? "1" : "0") + "," +
               r.train_continent + "," + r.test_continent + "," + format_double(r.rmse) + "," +
               format_double(r.ci_low) + "," + format_double(r.ci_high) + "," +
               std::to_string(r.selected_epoch) + "," + std::to_string(r.seed) + "," +
               format_double(r.seconds) + "\n";
    }
    return out;
}

inline std::vector<ResultRow> parse_results_csv(const std::string& text) {
    const auto lines = split(text, '\n');
    if (lines.empty() || std::string(trim(lines[0])) != kResultsHeader)
        throw ParseError("results.csv header mismatch", 1);
    std::vector<ResultRow> rows;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto line = trim(lines[li]);
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 13)
            throw ParseError("results row needs 13 fields", static_cast<int>(li + 1));
        ResultRow r;
        r.name = f[0];
        r.modality = f[1];
        r.train_size = static_cast<std::size_t>(parse_int(f[2], "train_size"));
        r.test_size = static_cast<std::size_t>(parse_int(f[3], "test_size"));
        r.augmented = f[4] == "1";
        r.train_continent = f[5];
        r.test_continent = f[6];
        r.rmse = parse_double(f[7], "rmse");
        r.ci_low = parse_double(f[8], "ci_low");
        r.ci_high = parse_double(f[9], "ci_high");
        r.selected_epoch = static_cast<int>(parse_int(f[10], "selected_epoch"));
        r.seed = static_cast<std::uint64_t>(parse_int(f[11], "seed"));
        r.seconds = parse_double(f[12], "seconds");
        rows.push_back(std::move(r));
    }
    return rows;
}

// "1.222 (1.033-1.423)"
inline std::string format_rmse_ci(double rmse_value, double lo, double hi) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.3f (%.3f-%.3f)", rmse_value, lo, hi);
    return buf;
}

// Writes results.csv, tables.md, and the plot-data CSVs. Refuses an empty
// result set before touching the filesystem; output bytes depend only on the
// rows, so regeneration is stable.
inline void report(std::vector<ResultRow> rows, const std::filesystem::path& out_dir) {
    if (rows.empty()) throw ConfigError("report: no results to write");
    std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return a.name != b.name ? a.name < b.name : a.seed < b.seed;
    });
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("report: cannot create " + out_dir.string() + ": " + ec.message());

    atomic_write_file(out_dir / "results.csv", serialize_results_csv(rows));

    std::string md = "| Experiment Name | RMSE (95% CI) |\n|---|---|\n";
    for (const auto& r : rows)
        md += "| " + r.name + " | " + format_rmse_ci(r.rmse, r.ci_low, r.ci_high) + " |\n";
    atomic_write_file(out_dir / "tables.md", md);

    std::string quantity = "name,modality,train_size,rmse,ci_low,ci_high\n";
    for (const auto& r : rows)
        quantity += r.name + "," + r.modality + "," + std::to_string(r.train_size) + "," +
                    format_double(r.rmse) + "," + format_double(r.ci_low) + "," +
                    format_double(r.ci_high) + "\n";
    atomic_write_file(out_dir / "rmse_vs_train_size.csv", quantity);

    std::string aug = "name,modality,augmented,rmse,ci_low,ci_high\n";
    for (const auto& r : rows)
        aug += r.name + "," + r.modality + "," + (r.augmented ? "1" : "0") + "," +
               format_double(r.rmse) + "," + format_double(r.ci_low) + "," +
               format_double(r.ci_high) + "\n";
    atomic_write_file(out_dir / "augmentation_effect.csv", aug);
}

}  // namespace povsat
