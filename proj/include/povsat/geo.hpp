#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "povsat/errors.hpp"
#include "povsat/image.hpp"
#include "povsat/rng.hpp"

namespace povsat {

inline constexpr double kEarthRadiusKm = 6371.0;

enum class Continent : std::uint8_t { Africa, Asia, Europe, SouthAmerica, Caribbean };

inline const std::vector<Continent>& all_continents() {
    static const std::vector<Continent> v{Continent::Africa, Continent::Asia, Continent::Europe,
                                          Continent::SouthAmerica, Continent::Caribbean};
    return v;
}

inline std::string continent_name(Continent c) {
    switch (c) {
        case Continent::Africa: return "Africa";
        case Continent::Asia: return "Asia";
        case Continent::Europe: return "Europe";
        case Continent::SouthAmerica: return "SouthAmerica";
        case Continent::Caribbean: return "Caribbean";
    }
    throw Error("unreachable continent");
}

inline Continent continent_from_name(const std::string& name) {
    for (Continent c : all_continents())
        if (continent_name(c) == name) return c;
    throw ParseError("unknown continent '" + name + "'");
}

enum class Split : std::uint8_t { Train, Tune, Test };

inline std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Tune: return "tune";
        case Split::Test: return "test";
    }
    throw Error("unreachable split");
}

inline Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "tune") return Split::Tune;
    if (name == "test") return Split::Test;
    throw ParseError("unknown split '" + name + "'");
}

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
};

inline void validate_coordinate(const GeoPoint& p) {
    if (p.lat < -90.0 || p.lat > 90.0 || p.lon < -180.0 || p.lon > 180.0)
        throw ConfigError("coordinate out of range");
}

// Great-circle distance on the 6371 km sphere.
inline double haversine_km(const GeoPoint& a, const GeoPoint& b) {
    constexpr double deg = std::numbers::pi / 180.0;
    const double phi1 = a.lat * deg, phi2 = b.lat * deg;
    const double dphi = (b.lat - a.lat) * deg;
    const double dlam = (b.lon - a.lon) * deg;
    const double s1 = std::sin(dphi / 2.0), s2 = std::sin(dlam / 2.0);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

// A geocoded wealth observation.
struct SurveyRecord {
    std::string id;
    GeoPoint location;
    std::string country;
    Continent continent = Continent::Africa;
    bool urban = false;
    double raw_wealth = 0.0;
};

inline constexpr double kRuralJitterKm = 5.0;
inline constexpr double kUrbanJitterKm = 2.0;

// Anonymization displacement: uniform over the disk of radius 2 km (urban)
// or 5 km (rural), stepped along a great circle so the distance is exact.
inline GeoPoint jitter(const GeoPoint& point, bool urban, Rng& rng) {
    validate_coordinate(point);
    const double radius = urban ? kUrbanJitterKm : kRuralJitterKm;
    const double dist = radius * std::sqrt(rng.uniform());
    const double bearing = rng.uniform(0.0, 2.0 * std::numbers::pi);

    constexpr double deg = std::numbers::pi / 180.0;
    const double delta = dist / kEarthRadiusKm;
    const double phi1 = point.lat * deg, lam1 = point.lon * deg;
    const double sphi2 = std::sin(phi1) * std::cos(delta) +
                         std::cos(phi1) * std::sin(delta) * std::cos(bearing);
    const double phi2 = std::asin(std::min(1.0, std::max(-1.0, sphi2)));
    const double lam2 = lam1 + std::atan2(std::sin(bearing) * std::sin(delta) * std::cos(phi1),
                                          std::cos(delta) - std::sin(phi1) * sphi2);

    GeoPoint out{phi2 / deg, lam2 / deg};
    while (out.lon > 180.0) out.lon -= 360.0;
    while (out.lon < -180.0) out.lon += 360.0;
    out.lat = std::min(90.0, std::max(-90.0, out.lat));
    return out;
}

// For each record, the index of the nearest tile of the requested kind.
// Ties break to the lexicographically lowest tile id.
inline std::vector<std::size_t> pair_nearest(const std::vector<SurveyRecord>& records,
                                             const std::vector<ImageTile>& tiles, TileKind kind) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < tiles.size(); ++i)
        if (tiles[i].kind == kind) candidates.push_back(i);
    if (candidates.empty())
        throw EmptyCatalogError("no " + tile_kind_name(kind) + " tiles in catalog");

    std::vector<std::size_t> out(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        std::size_t best = candidates[0];
        double best_dist = haversine_km(records[r].location, {tiles[best].lat, tiles[best].lon});
        for (std::size_t k = 1; k < candidates.size(); ++k) {
            const std::size_t i = candidates[k];
            const double d = haversine_km(records[r].location, {tiles[i].lat, tiles[i].lon});
            if (d < best_dist || (d == best_dist && tiles[i].id < tiles[best].id)) {
                best = i;
                best_dist = d;
            }
        }
        out[r] = best;
    }
    return out;
}

inline double median_of(std::vector<double> values) {
    if (values.empty()) throw ShapeError("median of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Maps raw wealth onto [-2, 2]: y = 2 * (x - median) / max|x - median|.
// The median maps to exactly 0 and order is preserved.
inline std::vector<double> normalize_wealth(const std::vector<double>& raw) {
    if (raw.empty()) throw ShapeError("normalize_wealth: empty input");
    const double med = median_of(raw);
    double maxdev = 0.0;
    for (double x : raw) maxdev = std::max(maxdev, std::abs(x - med));
    if (maxdev == 0.0)
        throw DegenerateDataError("normalize_wealth: all values identical, nothing to scale");
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = 2.0 * (raw[i] - med) / maxdev;
    return out;
}

struct SplitAssignment {
    std::map<std::string, Split> by_country;

    Split of(const std::string& country) const {
        const auto it = by_country.find(country);
        if (it == by_country.end()) throw Error("country '" + country + "' has no split");
        return it->second;
    }
};

inline std::size_t split_quota(std::size_t n_countries) {
    return std::max<std::size_t>(1, n_countries / 10);
}

// Country-level 80:10:10 split. Countries shuffle by seed; the first
// max(1, floor(0.1 C)) go to tune, the next as many to test, the rest train.
inline SplitAssignment split_by_country(const std::vector<SurveyRecord>& records,
                                        std::uint64_t seed) {
    std::vector<std::string> countries;
    for (const auto& r : records) countries.push_back(r.country);
    std::sort(countries.begin(), countries.end());
    countries.erase(std::unique(countries.begin(), countries.end()), countries.end());
    if (countries.size() < 3)
        throw ConfigError("need at least 3 countries to split, have " +
                          std::to_string(countries.size()));

    Rng rng(seed);
    rng.shuffle(countries);
    const std::size_t quota = split_quota(countries.size());

    SplitAssignment out;
    for (std::size_t i = 0; i < countries.size(); ++i) {
        Split s = Split::Train;
        if (i < quota) s = Split::Tune;
        else if (i < 2 * quota) s = Split::Test;
        out.by_country[countries[i]] = s;
    }
    return out;
}

struct CountryStat {
    std::string country;
    double average = 0.0;
    double median = 0.0;
    std::optional<double> variance;  // absent when a country has < 2 records
};

// Per-country mean, median, and sample variance (n-1) of normalized values.
inline std::vector<CountryStat> country_stats_normalized(
    const std::vector<std::pair<std::string, double>>& country_values) {
    std::map<std::string, std::vector<double>> grouped;
    for (const auto& [country, value] : country_values) grouped[country].push_back(value);

    std::vector<CountryStat> out;
    for (const auto& [country, values] : grouped) {
        CountryStat stat;
        stat.country = country;
        double sum = 0.0;
        for (double v : values) sum += v;
        stat.average = sum / static_cast<double>(values.size());
        stat.median = median_of(values);
        if (values.size() >= 2) {
            double ss = 0.0;
            for (double v : values) ss += (v - stat.average) * (v - stat.average);
            stat.variance = ss / static_cast<double>(values.size() - 1);
        }
        out.push_back(std::move(stat));
    }
    return out;  // std::map iteration keeps countries sorted
}

inline std::vector<CountryStat> country_stats(const std::vector<SurveyRecord>& records) {
    std::vector<double> raw;
    for (const auto& r : records) raw.push_back(r.raw_wealth);
    const std::vector<double> norm = normalize_wealth(raw);
    std::vector<std::pair<std::string, double>> pairs;
    for (std::size_t i = 0; i < records.size(); ++i) pairs.emplace_back(records[i].country, norm[i]);
    return country_stats_normalized(pairs);
}

inline std::string country_stats_csv(const std::vector<CountryStat>& stats) {
    std::string out = "country,average,median,variance\n";
    for (const auto& s : stats) {
        out += s.country + "," + format_double(s.average) + "," + format_double(s.median) + ",";
        if (s.variance.has_value()) out += format_double(*s.variance);
        out += "\n";
    }
    return out;
}

}  // namespace povsat
