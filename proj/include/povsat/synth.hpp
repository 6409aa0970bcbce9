#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "povsat/errors.hpp"
#include "povsat/geo.hpp"
#include "povsat/image.hpp"
#include "povsat/manifest.hpp"
#include "povsat/rng.hpp"

namespace povsat {

struct ContinentSpec {
    Continent continent = Continent::Africa;
    std::size_t countries = 1;
    double wealth_mean = 0.0;
    double wealth_spread = 0.3;
    double render_offset = 0.0;  // additive luminance shift, labels untouched
};

inline std::vector<ContinentSpec> default_continents() {
    return {
        {Continent::Africa, 10, -0.5, 0.3, 0.0},
        {Continent::Asia, 8, 0.1, 0.3, 0.0},
        {Continent::Europe, 6, 0.8, 0.3, 0.0},
        {Continent::SouthAmerica, 5, 0.2, 0.3, 0.0},
        {Continent::Caribbean, 4, 0.0, 0.3, 0.0},
    };
}

// Synthetic world: cities with a bimodal wealth distribution, night tiles
// whose mean luminance carries gain * wealth, day tiles carrying a quarter
// of that signal in the green channel.
struct SynthConfig {
    std::size_t n_cities = 1000;
    std::vector<ContinentSpec> continents = default_continents();
    std::size_t image_size = 32;
    double night_gain = 25.0;
    double pixel_noise_sigma = 8.0;
    double urban_fraction = 0.3;
    bool apply_jitter = true;
    std::uint64_t seed = 42;

    std::size_t total_countries() const {
        std::size_t n = 0;
        for (const auto& c : continents) n += c.countries;
        return n;
    }

    void validate() const {
        if (continents.empty()) throw ConfigError("synth: need at least one continent");
        for (std::size_t i = 0; i < continents.size(); ++i) {
            if (continents[i].countries < 1)
                throw ConfigError("synth: continent needs >= 1 country");
            if (continents[i].wealth_spread < 0.0)
                throw ConfigError("synth: wealth_spread must be >= 0");
            for (std::size_t j = i + 1; j < continents.size(); ++j)
                if (continents[i].continent == continents[j].continent)
                    throw ConfigError("synth: continent '" +
                                      continent_name(continents[i].continent) + "' listed twice");
        }
        if (n_cities < total_countries())
            throw ConfigError("synth: n_cities must cover every country at least once");
        if (image_size < 4 || image_size > 256)
            throw ConfigError("synth: image_size must be in [4, 256]");
        if (night_gain < 0.0) throw ConfigError("synth: night_gain must be >= 0");
        if (pixel_noise_sigma < 0.0) throw ConfigError("synth: pixel_noise_sigma must be >= 0");
        if (urban_fraction < 0.0 || urban_fraction > 1.0)
            throw ConfigError("synth: urban_fraction must be in [0, 1]");
    }
};

inline constexpr double kSynthBaseLuminance = 128.0;
inline constexpr double kSynthModeGap = 1.0;  // bimodal modes at mean +- gap

namespace detail {

struct SynthCity {
    std::string id;
    std::size_t continent_index = 0;
    std::size_t country_index = 0;  // within its continent
    std::string country;
    GeoPoint true_location;
    GeoPoint record_location;  // jittered when enabled
    bool urban = false;
    double raw_wealth = 0.0;
    double norm_wealth = 0.0;
};

// Disjoint geographic patch for a country: a longitude band per continent,
// a latitude slice per country, with margins far larger than the jitter.
struct CountryPatch {
    double lat_lo, lat_hi, lon_lo, lon_hi;
};

inline CountryPatch country_patch(std::size_t continent_index, std::size_t country_index,
                                  std::size_t countries_in_continent) {
    const double lon0 = -170.0 + static_cast<double>(continent_index) * 68.0;
    const double slice = 120.0 / static_cast<double>(countries_in_continent);
    const double lat0 = -55.0 + static_cast<double>(country_index) * slice;
    return {lat0 + 0.15 * slice, lat0 + 0.85 * slice, lon0 + 2.0, lon0 + 38.0};
}

inline std::vector<SynthCity> synth_cities(const SynthConfig& config) {
    config.validate();

    struct CountryRef {
        std::size_t continent_index;
        std::size_t country_index;
        std::string name;
    };
    std::vector<CountryRef> countries;
    for (std::size_t ci = 0; ci < config.continents.size(); ++ci) {
        const auto& spec = config.continents[ci];
        for (std::size_t k = 0; k < spec.countries; ++k) {
            char buf[24];
            std::snprintf(buf, sizeof(buf), "%02zu", k);
            countries.push_back({ci, k, continent_name(spec.continent) + "-" + buf});
        }
    }

    std::vector<SynthCity> cities(config.n_cities);
    std::vector<double> raws(config.n_cities);
    for (std::size_t i = 0; i < config.n_cities; ++i) {
        const auto& cref = countries[i % countries.size()];
        const auto& spec = config.continents[cref.continent_index];
        SynthCity& city = cities[i];

        char buf[32];
        std::snprintf(buf, sizeof(buf), "city-%06zu", i);
        city.id = buf;
        city.continent_index = cref.continent_index;
        city.country_index = cref.country_index;
        city.country = cref.name;

        Rng rng(derive_seed(config.seed, "city", i));
        const auto patch = country_patch(cref.continent_index, cref.country_index, spec.countries);
        city.true_location = {rng.uniform(patch.lat_lo, patch.lat_hi),
                              rng.uniform(patch.lon_lo, patch.lon_hi)};
        const double mode = rng.bernoulli(0.5) ? kSynthModeGap : -kSynthModeGap;
        city.raw_wealth = spec.wealth_mean + mode + rng.normal(0.0, spec.wealth_spread);
        city.urban = rng.bernoulli(config.urban_fraction);
        raws[i] = city.raw_wealth;

        if (config.apply_jitter) {
            Rng jit(derive_seed(config.seed, "jitter", i));
            city.record_location = jitter(city.true_location, city.urban, jit);
        } else {
            city.record_location = city.true_location;
        }
    }

    const auto norm = normalize_wealth(raws);
    for (std::size_t i = 0; i < cities.size(); ++i) cities[i].norm_wealth = norm[i];
    return cities;
}

}  // namespace detail

// Normalized labels the generator would plant, without rendering tiles.
inline std::vector<double> synth_labels(const SynthConfig& config) {
    const auto cities = detail::synth_cities(config);
    std::vector<double> labels(cities.size());
    for (std::size_t i = 0; i < cities.size(); ++i) labels[i] = cities[i].norm_wealth;
    return labels;
}

// Writes tiles and manifest.csv under out_dir and returns the manifest.
inline DatasetManifest generate_world(const SynthConfig& config,
                                      const std::filesystem::path& out_dir) {
    const auto cities = detail::synth_cities(config);

    std::vector<SurveyRecord> records(cities.size());
    for (std::size_t i = 0; i < cities.size(); ++i) {
        records[i].id = cities[i].id;
        records[i].location = cities[i].record_location;
        records[i].country = cities[i].country;
        records[i].continent = config.continents[cities[i].continent_index].continent;
        records[i].urban = cities[i].urban;
        records[i].raw_wealth = cities[i].raw_wealth;
    }
    const auto splits = split_by_country(records, derive_seed(config.seed, "split"));

    std::filesystem::create_directories(out_dir / "tiles");
    DatasetManifest manifest;
    manifest.base_dir = out_dir;
    manifest.rows.resize(cities.size());

    const std::size_t n = config.image_size;
    const auto clamp255 = [](double v) { return std::min(255.0, std::max(0.0, v)); };
    const auto render_pixels = [&](ImageTile& tile, std::size_t channel,
                                   double mean, Rng& rng) {
        const std::size_t ch = tile.channels();
        for (std::size_t p = 0; p < n * n; ++p) {
            const double v = clamp255(std::floor(mean + rng.normal(0.0, config.pixel_noise_sigma) + 0.5));
            tile.pixels[p * ch + channel] = static_cast<std::uint8_t>(v);
        }
    };

    for (std::size_t i = 0; i < cities.size(); ++i) {
        const auto& city = cities[i];
        const double offset = config.continents[city.continent_index].render_offset;
        Rng rng(derive_seed(config.seed, "tile", i));

        // Night: single channel, mean luminance = base + gain * wealth + offset + noise.
        ImageTile night = make_tile(city.id, TileKind::Night, n, n, city.true_location.lat,
                                    city.true_location.lon);
        const double night_mean = clamp255(kSynthBaseLuminance + config.night_gain * city.norm_wealth +
                                           offset + rng.normal(0.0, config.pixel_noise_sigma));
        render_pixels(night, 0, night_mean, rng);

        // Day: quarter of the night signal in the green channel only.
        ImageTile day = make_tile(city.id, TileKind::Day, n, n, city.true_location.lat,
                                  city.true_location.lon);
        const double red_mean = clamp255(kSynthBaseLuminance + rng.normal(0.0, config.pixel_noise_sigma));
        const double green_mean =
            clamp255(kSynthBaseLuminance + (config.night_gain / 4.0) * city.norm_wealth + offset +
                     rng.normal(0.0, config.pixel_noise_sigma));
        const double blue_mean = clamp255(kSynthBaseLuminance + rng.normal(0.0, config.pixel_noise_sigma));
        render_pixels(day, 0, red_mean, rng);
        render_pixels(day, 1, green_mean, rng);
        render_pixels(day, 2, blue_mean, rng);

        ManifestRow& row = manifest.rows[i];
        row.id = city.id;
        row.country = city.country;
        row.continent = config.continents[city.continent_index].continent;
        row.lat = city.record_location.lat;
        row.lon = city.record_location.lon;
        row.urban = city.urban;
        row.raw_wealth = city.raw_wealth;
        row.norm_wealth = city.norm_wealth;
        row.day_path = "tiles/" + city.id + "_day.ppm";
        row.night_path = "tiles/" + city.id + "_night.pgm";
        row.split = splits.of(city.country);

        write_tile(night, manifest.resolve(row.night_path));
        write_tile(day, manifest.resolve(row.day_path));
    }

    save_manifest(manifest, out_dir / "manifest.csv");
    return manifest;
}

// RMSE of the best linear predictor from mean night luminance to the label,
// in closed form: sqrt(V * s^2 / (g^2 V + s^2)) with V the label variance,
// g the night gain and s the tile-level noise sigma. With g = 0 this is the
// label standard deviation (the mean predictor).
inline double oracle_rmse(const SynthConfig& config) {
    const auto labels = synth_labels(config);
    double mean = 0.0;
    for (double v : labels) mean += v;
    mean /= static_cast<double>(labels.size());
    double var = 0.0;
    for (double v : labels) var += (v - mean) * (v - mean);
    var /= static_cast<double>(labels.size());

    if (config.night_gain == 0.0) return std::sqrt(var);

    // The closed form assumes the planted model is linear, i.e. unclamped.
    for (const auto& c : config.continents) {
        const double lo = kSynthBaseLuminance - 2.0 * config.night_gain + c.render_offset -
                          3.0 * config.pixel_noise_sigma;
        const double hi = kSynthBaseLuminance + 2.0 * config.night_gain + c.render_offset +
                          3.0 * config.pixel_noise_sigma;
        if (lo < 0.0 || hi > 255.0)
            throw UnsupportedError(
                "oracle_rmse: config clamps the luminance range, planted model is not linear");
    }

    const double g2v = config.night_gain * config.night_gain * var;
    const double s2 = config.pixel_noise_sigma * config.pixel_noise_sigma;
    return std::sqrt(var * s2 / (g2v + s2));
}

}  // namespace povsat
