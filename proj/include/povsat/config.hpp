#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "povsat/errors.hpp"
#include "povsat/experiment.hpp"
#include "povsat/synth.hpp"
#include "povsat/train.hpp"
#include "povsat/util.hpp"

namespace povsat {

// Plain-text "key = value" configuration with [section] headers and '#'
// comments. Keys may repeat (lists). Unknown keys are hard errors so typos
// surface immediately.
struct ConfigEntry {
    std::string value;
    int line = 0;
};

class ConfigFile {
public:
    static ConfigFile parse_text(const std::string& text) {
        ConfigFile cfg;
        std::string section;
        const auto lines = split(text, '\n');
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const int lineno = static_cast<int>(i + 1);
            std::string_view line = trim(lines[i]);
            if (line.empty() || line.front() == '#') continue;
            if (line.front() == '[') {
                if (line.back() != ']') throw ConfigError("unterminated section header", lineno);
                section = std::string(trim(line.substr(1, line.size() - 2)));
                if (section.empty()) throw ConfigError("empty section name", lineno);
                cfg.sections_[section];  // a header alone is a valid (empty) section
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError("expected 'key = value'", lineno);
            const std::string key(trim(line.substr(0, eq)));
            const std::string value(trim(line.substr(eq + 1)));
            if (key.empty()) throw ConfigError("empty key", lineno);
            if (section.empty()) throw ConfigError("key outside any [section]", lineno);
            cfg.sections_[section][key].push_back({value, lineno});
        }
        return cfg;
    }

    static ConfigFile parse_file(const std::filesystem::path& path) {
        return parse_text(read_file(path));
    }

    bool has_section(const std::string& name) const { return sections_.count(name) > 0; }

    std::vector<std::string> section_names() const {
        std::vector<std::string> out;
        for (const auto& [name, keys] : sections_) out.push_back(name);
        return out;
    }

    friend class SectionReader;

private:
    std::map<std::string, std::map<std::string, std::vector<ConfigEntry>>> sections_;
};

// Typed access to one section; tracks which keys were consumed and flags the
// leftovers as errors.
class SectionReader {
public:
    SectionReader(const ConfigFile& cfg, const std::string& section)
        : section_(section) {
        const auto it = cfg.sections_.find(section);
        if (it == cfg.sections_.end()) throw ConfigError("missing [" + section + "] section");
        entries_ = &it->second;
    }

    std::optional<std::string> get_string(const std::string& key) {
        const auto it = entries_->find(key);
        if (it == entries_->end()) return std::nullopt;
        consumed_.insert(key);
        if (it->second.size() != 1)
            throw ConfigError("key '" + key + "' given more than once", it->second.back().line);
        return it->second.front().value;
    }

    std::string require_string(const std::string& key) {
        auto v = get_string(key);
        if (!v.has_value())
            throw ConfigError("missing required key '" + key + "' in [" + section_ + "]");
        return *v;
    }

    std::optional<double> get_double(const std::string& key) {
        const auto v = get_string(key);
        if (!v.has_value()) return std::nullopt;
        try {
            return parse_double(*v, key);
        } catch (const ParseError& e) {
            throw ConfigError(e.what(), line_of(key));
        }
    }

    std::optional<long long> get_int(const std::string& key) {
        const auto v = get_string(key);
        if (!v.has_value()) return std::nullopt;
        try {
            return parse_int(*v, key);
        } catch (const ParseError& e) {
            throw ConfigError(e.what(), line_of(key));
        }
    }

    std::optional<bool> get_bool(const std::string& key) {
        const auto v = get_string(key);
        if (!v.has_value()) return std::nullopt;
        if (*v == "true" || *v == "1" || *v == "yes") return true;
        if (*v == "false" || *v == "0" || *v == "no") return false;
        throw ConfigError("key '" + key + "' must be a boolean, got '" + *v + "'", line_of(key));
    }

    std::vector<ConfigEntry> repeated(const std::string& key) {
        const auto it = entries_->find(key);
        if (it == entries_->end()) return {};
        consumed_.insert(key);
        return it->second;
    }

    // Call after reading everything the section supports.
    void reject_unknown_keys() const {
        for (const auto& [key, entries] : *entries_)
            if (consumed_.count(key) == 0)
                throw ConfigError("unknown key '" + key + "' in [" + section_ + "]",
                                  entries.front().line);
    }

private:
    int line_of(const std::string& key) const {
        const auto it = entries_->find(key);
        return it == entries_->end() ? 0 : it->second.front().line;
    }

    std::string section_;
    const std::map<std::string, std::vector<ConfigEntry>>* entries_;
    std::set<std::string> consumed_;
};

inline TileKind tile_kind_from_string(const std::string& s) {
    if (s == "night") return TileKind::Night;
    if (s == "day") return TileKind::Day;
    throw ConfigError("modality must be 'night' or 'day', got '" + s + "'");
}

// [synth] section. Continents use repeated keys:
//   continent = Africa:5:-0.5:0.3:0
// with fields name:countries:wealth_mean:wealth_spread:render_offset.
inline SynthConfig load_synth_config(const ConfigFile& cfg) {
    SectionReader sec(cfg, "synth");
    SynthConfig out;
    out.n_cities = static_cast<std::size_t>(sec.get_int("n_cities").value_or(-1));
    if (out.n_cities == static_cast<std::size_t>(-1))
        throw ConfigError("missing required key 'n_cities' in [synth]");
    if (const auto v = sec.get_int("image_size")) out.image_size = static_cast<std::size_t>(*v);
    if (const auto v = sec.get_double("night_gain")) out.night_gain = *v;
    if (const auto v = sec.get_double("pixel_noise_sigma")) out.pixel_noise_sigma = *v;
    if (const auto v = sec.get_double("urban_fraction")) out.urban_fraction = *v;
    if (const auto v = sec.get_bool("apply_jitter")) out.apply_jitter = *v;
    if (const auto v = sec.get_int("seed")) out.seed = static_cast<std::uint64_t>(*v);

    const auto continents = sec.repeated("continent");
    if (!continents.empty()) {
        out.continents.clear();
        for (const auto& entry : continents) {
            const auto parts = split(entry.value, ':');
            if (parts.size() != 5)
                throw ConfigError(
                    "continent needs name:countries:wealth_mean:wealth_spread:render_offset",
                    entry.line);
            ContinentSpec spec;
            try {
                spec.continent = continent_from_name(parts[0]);
                spec.countries = static_cast<std::size_t>(parse_int(parts[1], "countries"));
                spec.wealth_mean = parse_double(parts[2], "wealth_mean");
                spec.wealth_spread = parse_double(parts[3], "wealth_spread");
                spec.render_offset = parse_double(parts[4], "render_offset");
            } catch (const ParseError& e) {
                throw ConfigError(e.what(), entry.line);
            }
            out.continents.push_back(spec);
        }
    }
    sec.reject_unknown_keys();
    out.validate();
    return out;
}

namespace detail {

inline void read_train_keys(SectionReader& sec, TrainConfig& out, bool& augmentation_flag) {
    if (const auto v = sec.get_string("modality")) out = default_train_config(tile_kind_from_string(*v));
    if (const auto v = sec.get_double("learning_rate")) out.learning_rate = *v;
    if (const auto v = sec.get_double("momentum")) out.momentum = *v;
    if (const auto v = sec.get_int("epochs")) out.epochs = static_cast<int>(*v);
    if (const auto v = sec.get_int("batch_size")) out.batch_size = static_cast<int>(*v);
    if (const auto v = sec.get_int("seed")) out.seed = static_cast<std::uint64_t>(*v);

    augmentation_flag = sec.get_bool("augmentation").value_or(false);
    AugmentationConfig aug;
    bool any_aug_key = false;
    if (const auto v = sec.get_double("noise_sigma")) {
        aug.noise_sigma = *v;
        any_aug_key = true;
    }
    if (const auto v = sec.get_double("apply_probability")) {
        aug.apply_probability = *v;
        any_aug_key = true;
    }
    if (const auto v = sec.get_bool("enable_flip")) {
        aug.enable_flip = *v;
        any_aug_key = true;
    }
    if (const auto v = sec.get_bool("enable_rot90")) {
        aug.enable_rot90 = *v;
        any_aug_key = true;
    }
    if (const auto v = sec.get_bool("enable_noise")) {
        aug.enable_noise = *v;
        any_aug_key = true;
    }
    if (augmentation_flag || any_aug_key) out.augmentation = aug;
}

}  // namespace detail

// [train] section for the standalone train command.
inline TrainConfig load_train_config(const ConfigFile& cfg) {
    SectionReader sec(cfg, "train");
    TrainConfig out = default_train_config(TileKind::Night);
    bool augmentation_flag = false;
    detail::read_train_keys(sec, out, augmentation_flag);
    if (!augmentation_flag) out.augmentation.reset();
    sec.reject_unknown_keys();
    if (out.learning_rate <= 0.0)
        throw ConfigError("learning_rate must be > 0");
    out.validate();
    return out;
}

// [experiment] section; either standalone or as overrides over a preset.
inline ExperimentConfig load_experiment_config(const ConfigFile& cfg) {
    SectionReader sec(cfg, "experiment");

    ExperimentConfig out;
    if (const auto p = sec.get_string("preset")) {
        out = preset(*p);
    } else {
        out = make_experiment_config("", TileKind::Night);
    }
    if (const auto v = sec.get_string("name")) out.name = *v;
    if (out.name.empty())
        throw ConfigError("experiment needs 'name' or 'preset' in [experiment]");
    if (const auto v = sec.get_string("modality")) {
        out.modality = tile_kind_from_string(*v);
        out.train = default_train_config(out.modality);
    }
    if (const auto v = sec.get_int("train_size")) out.train_size = static_cast<std::size_t>(*v);
    if (const auto v = sec.get_int("test_size")) out.test_size = static_cast<std::size_t>(*v);
    if (const auto v = sec.get_int("seed")) out.seed = static_cast<std::uint64_t>(*v);
    if (const auto v = sec.get_string("train_continent"))
        out.train_continent = continent_from_name(*v);
    if (const auto v = sec.get_string("test_continent"))
        out.test_continent = continent_from_name(*v);

    if (const auto v = sec.get_double("learning_rate")) out.train.learning_rate = *v;
    if (const auto v = sec.get_double("momentum")) out.train.momentum = *v;
    if (const auto v = sec.get_int("epochs")) out.train.epochs = static_cast<int>(*v);
    if (const auto v = sec.get_int("batch_size")) out.train.batch_size = static_cast<int>(*v);

    bool augmentation_flag = out.augmentation;
    if (const auto v = sec.get_bool("augmentation")) augmentation_flag = *v;
    AugmentationConfig aug = out.train.augmentation.value_or(AugmentationConfig{});
    if (const auto v = sec.get_double("noise_sigma")) aug.noise_sigma = *v;
    if (const auto v = sec.get_double("apply_probability")) aug.apply_probability = *v;
    if (const auto v = sec.get_bool("enable_flip")) aug.enable_flip = *v;
    if (const auto v = sec.get_bool("enable_rot90")) aug.enable_rot90 = *v;
    if (const auto v = sec.get_bool("enable_noise")) aug.enable_noise = *v;
    out.augmentation = augmentation_flag;
    if (augmentation_flag) out.train.augmentation = aug;

    sec.reject_unknown_keys();
    if (out.train.learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
    out.validate();
    return out;
}

}  // namespace povsat
