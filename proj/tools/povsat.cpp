// povsat: poverty-from-satellite-imagery pipeline CLI.
//
// Subcommands: synth-gen, split, train, eval, experiment, report, stats.
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error, 3 data
// shortage. POVSAT_THREADS caps internal parallelism (0 = auto).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "povsat/checkpoint.hpp"
#include "povsat/config.hpp"
#include "povsat/experiment.hpp"
#include "povsat/geo.hpp"
#include "povsat/manifest.hpp"
#include "povsat/synth.hpp"
#include "povsat/train.hpp"

namespace fs = std::filesystem;
using namespace povsat;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string hash_of_file(const fs::path& path) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                  static_cast<unsigned long long>(fnv1a64(read_file(path))));
    return buf;
}

// Reproducibility breadcrumb written next to every output directory.
void write_run_manifest(const fs::path& out_dir, const std::vector<std::string>& argv_echo,
                        const std::string& config_hash, std::uint64_t seed,
                        const std::vector<std::string>& artifacts) {
    std::string text;
    text += "tool_version = " + std::string(kToolVersion) + "\n";
    std::string cmd;
    for (const auto& a : argv_echo) cmd += (cmd.empty() ? "" : " ") + a;
    text += "command = " + cmd + "\n";
    text += "config_hash = " + (config_hash.empty() ? std::string("-") : config_hash) + "\n";
    text += "seed = " + std::to_string(seed) + "\n";
    for (const auto& a : artifacts) text += "artifact = " + a + "\n";
    atomic_write_file(out_dir / "run_manifest.txt", text);
}

bool timing_enabled() {
    const char* env = std::getenv("POVSAT_TIMING");
    return env != nullptr && std::string(env) == "1";
}

std::vector<LabeledExample> examples_of_split(const DatasetManifest& manifest, Split split,
                                              TileKind kind) {
    std::vector<LabeledExample> out;
    for (const auto& row : manifest.rows) {
        if (row.split != split) continue;
        out.push_back({row.id,
                       read_tile(manifest.resolve(row.tile_path(kind)), kind, row.id, row.lat,
                                 row.lon),
                       row.norm_wealth});
    }
    return out;
}

int cmd_synth_gen(const fs::path& config_path, const fs::path& out_dir,
                  const std::vector<std::string>& argv_echo) {
    const auto cfg = load_synth_config(ConfigFile::parse_file(config_path));
    fs::create_directories(out_dir);
    const auto manifest = generate_world(cfg, out_dir);
    write_run_manifest(out_dir, argv_echo, hash_of_file(config_path), cfg.seed,
                       {"manifest.csv", "tiles/"});
    std::printf("wrote %zu cities (%zu tiles) to %s\n", manifest.rows.size(),
                2 * manifest.rows.size(), out_dir.string().c_str());
    return 0;
}

int cmd_split(const fs::path& manifest_path, std::uint64_t seed, const fs::path& out_path) {
    auto manifest = load_manifest(manifest_path);
    std::vector<SurveyRecord> records;
    for (const auto& row : manifest.rows) {
        SurveyRecord r;
        r.id = row.id;
        r.location = {row.lat, row.lon};
        r.country = row.country;
        r.continent = row.continent;
        r.urban = row.urban;
        r.raw_wealth = row.raw_wealth;
        records.push_back(std::move(r));
    }
    const auto assignment = split_by_country(records, seed);
    for (auto& row : manifest.rows) row.split = assignment.of(row.country);
    save_manifest(manifest, out_path);
    std::printf("reassigned splits for %zu rows across %zu countries -> %s\n",
                manifest.rows.size(), assignment.by_country.size(), out_path.string().c_str());
    return 0;
}

int cmd_train(const fs::path& manifest_path, const fs::path& config_path, const fs::path& out_dir,
              const std::vector<std::string>& argv_echo) {
    const auto manifest = load_manifest(manifest_path);
    const auto cfg = load_train_config(ConfigFile::parse_file(config_path));

    const auto train_set = examples_of_split(manifest, Split::Train, cfg.modality);
    const auto tune_set = examples_of_split(manifest, Split::Tune, cfg.modality);
    if (train_set.empty()) throw ShortageError("train examples", 1, 0);
    if (tune_set.empty()) throw ShortageError("tune examples", 1, 0);

    const std::size_t input_dim = flatten(train_set.front().tile).size();
    const auto model = init_model(input_dim, {512, 512}, derive_seed(cfg.seed, "init"));
    const auto output = train(model, train_set, tune_set, cfg);

    fs::create_directories(out_dir);
    std::vector<std::string> artifacts;
    std::string log = "epoch,tune_rmse\n";
    for (const auto& rec : output.epochs) {
        char name[48];
        std::snprintf(name, sizeof(name), "checkpoint_epoch_%03d.pvsat", rec.epoch);
        save_checkpoint(rec.checkpoint, out_dir / name);
        artifacts.push_back(name);
        log += std::to_string(rec.epoch) + "," + format_double(rec.tune_rmse) + "\n";
    }
    save_checkpoint(output.selected().checkpoint, out_dir / "checkpoint_selected.pvsat");
    artifacts.push_back("checkpoint_selected.pvsat");
    atomic_write_file(out_dir / "training_log.csv", log);
    artifacts.push_back("training_log.csv");
    write_run_manifest(out_dir, argv_echo, hash_of_file(config_path), cfg.seed, artifacts);
    std::printf("selected epoch %d (tune RMSE %s) -> %s\n", output.selected().epoch,
                format_double(output.selected().tune_rmse).c_str(), out_dir.string().c_str());
    return 0;
}

int cmd_eval(const fs::path& checkpoint_path, const fs::path& manifest_path,
             const std::string& split_str, const std::string& modality, std::uint64_t seed,
             std::string name, const fs::path& out_path) {
    const auto checkpoint = load_checkpoint(checkpoint_path);
    const auto manifest = load_manifest(manifest_path);
    const Split split = split_from_name(split_str);
    const auto test_set = examples_of_split(manifest, split, tile_kind_from_string(modality));
    if (test_set.empty()) throw ShortageError(split_str + " examples", 1, 0);

    const auto result = evaluate(checkpoint, test_set, seed);
    if (name.empty()) name = checkpoint_path.stem().string();
    std::string csv = "experiment,rmse,ci_low,ci_high,n,seed\n";
    csv += name + "," + format_double(result.rmse) + "," + format_double(result.ci_low) + "," +
           format_double(result.ci_high) + "," + std::to_string(result.n_examples) + "," +
           std::to_string(seed) + "\n";
    std::fputs(csv.c_str(), stdout);
    if (!out_path.empty()) atomic_write_file(out_path, csv);
    return 0;
}

int cmd_experiment(const std::string& preset_name, const fs::path& config_path,
                   const fs::path& data_dir, const fs::path& out_dir, std::int64_t seed_override,
                   unsigned replicates, const std::vector<std::string>& argv_echo) {
    ExperimentConfig cfg;
    std::string config_hash;
    if (!preset_name.empty() && !config_path.empty())
        throw ConfigError("give either --preset or --config, not both");
    if (!preset_name.empty()) {
        cfg = preset(preset_name);
    } else if (!config_path.empty()) {
        cfg = load_experiment_config(ConfigFile::parse_file(config_path));
        config_hash = hash_of_file(config_path);
    } else {
        throw ConfigError("experiment needs --preset or --config");
    }
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (replicates < 1) throw ConfigError("--replicates must be >= 1");

    const auto manifest = load_manifest(data_dir / "manifest.csv");
    fs::create_directories(out_dir);
    std::vector<ResultRow> rows;
    std::vector<std::string> artifacts{"results.csv"};
    for (unsigned r = 0; r < replicates; ++r) {
        ExperimentConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + r;
        auto result = run_experiment(run_cfg, manifest);
        if (!timing_enabled()) result.seconds = 0.0;  // keep outputs byte-reproducible
        rows.push_back(to_result_row(result));

        std::string ckpt_name = "checkpoint_selected.pvsat";
        if (replicates > 1)
            ckpt_name = "checkpoint_selected_seed" + std::to_string(run_cfg.seed) + ".pvsat";
        save_checkpoint(result.selected_checkpoint, out_dir / ckpt_name);
        artifacts.push_back(ckpt_name);
        std::printf("%s (seed %llu): RMSE %s\n", run_cfg.name.c_str(),
                    static_cast<unsigned long long>(run_cfg.seed),
                    format_rmse_ci(result.eval.rmse, result.eval.ci_low, result.eval.ci_high)
                        .c_str());
    }
    atomic_write_file(out_dir / "results.csv", serialize_results_csv(rows));
    write_run_manifest(out_dir, argv_echo, config_hash, cfg.seed, artifacts);
    return 0;
}

int cmd_report(const fs::path& results_dir, const fs::path& out_dir,
               const std::vector<std::string>& argv_echo) {
    std::vector<ResultRow> rows;
    std::vector<fs::path> files;
    if (fs::is_regular_file(results_dir)) {
        files.push_back(results_dir);
    } else {
        for (const auto& entry : fs::recursive_directory_iterator(results_dir))
            if (entry.is_regular_file() && entry.path().filename() == "results.csv")
                files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
        for (auto& row : parse_results_csv(read_file(f))) rows.push_back(std::move(row));
    report(rows, out_dir);
    write_run_manifest(out_dir, argv_echo, "", 0,
                       {"results.csv", "tables.md", "rmse_vs_train_size.csv",
                        "augmentation_effect.csv"});
    std::printf("report over %zu results -> %s\n", rows.size(), out_dir.string().c_str());
    return 0;
}

int cmd_stats(const fs::path& manifest_path, const fs::path& out_path) {
    const auto manifest = load_manifest(manifest_path, /*check_tiles=*/false);
    std::vector<std::pair<std::string, double>> values;
    for (const auto& row : manifest.rows) values.emplace_back(row.country, row.norm_wealth);
    const auto csv = country_stats_csv(country_stats_normalized(values));
    std::fputs(csv.c_str(), stdout);
    if (!out_path.empty()) atomic_write_file(out_path, csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::string> argv_echo(argv, argv + argc);

    CLI::App app{"poverty prediction from satellite imagery: synthetic worlds, "
                 "MLP training, and the experiment families"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth-gen", "generate a synthetic world");
    fs::path synth_config, synth_out;
    synth->add_option("--config", synth_config, "config file with a [synth] section")->required();
    synth->add_option("--out", synth_out, "output directory")->required();

    auto* split_cmd = app.add_subcommand("split", "reassign country-level splits");
    fs::path split_manifest, split_out;
    std::uint64_t split_seed = 0;
    split_cmd->add_option("--manifest", split_manifest, "dataset manifest CSV")->required();
    split_cmd->add_option("--seed", split_seed, "shuffle seed")->required();
    split_cmd->add_option("--out", split_out, "output manifest path")->required();

    auto* train_cmd = app.add_subcommand("train", "train on the manifest's train/tune splits");
    fs::path train_manifest, train_config, train_out;
    train_cmd->add_option("--manifest", train_manifest, "dataset manifest CSV")->required();
    train_cmd->add_option("--config", train_config, "config file with a [train] section")
        ->required();
    train_cmd->add_option("--out", train_out, "output directory")->required();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on one split");
    fs::path eval_checkpoint, eval_manifest, eval_out;
    std::string eval_split = "test", eval_name, eval_modality = "night";
    std::uint64_t eval_seed = 1;
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest CSV")->required();
    eval_cmd->add_option("--split", eval_split, "split to evaluate (default test)");
    eval_cmd->add_option("--modality", eval_modality, "night or day (default night)");
    eval_cmd->add_option("--seed", eval_seed, "bootstrap seed");
    eval_cmd->add_option("--name", eval_name, "experiment column value");
    eval_cmd->add_option("--out", eval_out, "also write the CSV row here");

    auto* exp_cmd = app.add_subcommand("experiment", "run one experiment end to end");
    std::string exp_preset;
    fs::path exp_config, exp_data, exp_out;
    std::int64_t exp_seed = -1;
    unsigned exp_replicates = 1;
    exp_cmd->add_option("--preset", exp_preset, "preset name");
    exp_cmd->add_option("--config", exp_config, "config file with an [experiment] section");
    exp_cmd->add_option("--data", exp_data, "world directory containing manifest.csv")->required();
    exp_cmd->add_option("--out", exp_out, "output directory")->required();
    exp_cmd->add_option("--seed", exp_seed, "override the experiment seed");
    exp_cmd->add_option("--replicates", exp_replicates, "replicate runs at consecutive seeds");

    auto* report_cmd = app.add_subcommand("report", "merge results.csv files into a report");
    fs::path report_results, report_out;
    report_cmd->add_option("--results", report_results, "directory scanned for results.csv files")
        ->required();
    report_cmd->add_option("--out", report_out, "output directory")->required();

    auto* stats_cmd = app.add_subcommand("stats", "country wealth statistics from a manifest");
    fs::path stats_manifest, stats_out;
    stats_cmd->add_option("--manifest", stats_manifest, "dataset manifest CSV")->required();
    stats_cmd->add_option("--out", stats_out, "also write the CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth_gen(synth_config, synth_out, argv_echo);
        if (split_cmd->parsed()) return cmd_split(split_manifest, split_seed, split_out);
        if (train_cmd->parsed())
            return cmd_train(train_manifest, train_config, train_out, argv_echo);
        if (eval_cmd->parsed())
            return cmd_eval(eval_checkpoint, eval_manifest, eval_split, eval_modality, eval_seed,
                            eval_name, eval_out);
        if (exp_cmd->parsed())
            return cmd_experiment(exp_preset, exp_config, exp_data, exp_out, exp_seed,
                                  exp_replicates, argv_echo);
        if (report_cmd->parsed()) return cmd_report(report_results, report_out, argv_echo);
        if (stats_cmd->parsed()) return cmd_stats(stats_manifest, stats_out);
        std::fputs("no subcommand\n", stderr);
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ShortageError& e) {
        std::fprintf(stderr, "data shortage: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
