#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "povsat/errors.hpp"
#include "povsat/geo.hpp"
#include "povsat/util.hpp"

namespace povsat {

inline constexpr const char* kManifestHeader =
    "id,country,continent,lat,lon,urban,raw_wealth,norm_wealth,day_path,night_path,split";

// One labeled example: a city with its paired day/night tiles.
struct ManifestRow {
    std::string id;
    std::string country;
    Continent continent = Continent::Africa;
    double lat = 0.0;
    double lon = 0.0;
    bool urban = false;
    double raw_wealth = 0.0;
    double norm_wealth = 0.0;
    std::string day_path;    // relative to the manifest's directory
    std::string night_path;  // relative to the manifest's directory
    Split split = Split::Train;

    const std::string& tile_path(TileKind kind) const {
        return kind == TileKind::Night ? night_path : day_path;
    }
};

struct DatasetManifest {
    std::filesystem::path base_dir;  // directory the manifest file lives in
    std::vector<ManifestRow> rows;

    std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }
};

namespace detail {

inline std::string csv_field(const std::string& v) {
    if (v.find(',') != std::string::npos || v.find('\n') != std::string::npos)
        throw ParseError("manifest field may not contain ',' or newline: '" + v + "'");
    return v;
}

}  // namespace detail

inline std::string serialize_manifest(const DatasetManifest& manifest) {
    std::string out = std::string(kManifestHeader) + "\n";
    for (const auto& r : manifest.rows) {
        out += detail::csv_field(r.id) + ",";
        out += detail::csv_field(r.country) + ",";
        out += continent_name(r.continent) + ",";
        out += format_double(r.lat) + ",";
        out += format_double(r.lon) + ",";
        out += (r.urban ? "1," : "0,");
        out += format_double(r.raw_wealth) + ",";
        out += format_double(r.norm_wealth) + ",";
        out += detail::csv_field(r.day_path) + ",";
        out += detail::csv_field(r.night_path) + ",";
        out += split_name(r.split) + "\n";
    }
    return out;
}

inline void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    atomic_write_file(path, serialize_manifest(manifest));
}

inline DatasetManifest load_manifest(const std::filesystem::path& path, bool check_tiles = true) {
    const std::string text = read_file(path);
    DatasetManifest manifest;
    manifest.base_dir = path.parent_path();

    const auto lines = split(text, '\n');
    if (lines.empty() || std::string(trim(lines[0])) != kManifestHeader)
        throw ParseError("manifest header mismatch; expected '" + std::string(kManifestHeader) + "'", 1);

    std::set<std::string> seen_ids;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::string_view line = trim(lines[li]);
        if (line.empty()) continue;
        const int lineno = static_cast<int>(li + 1);
        const auto fields = split(line, ',');
        if (fields.size() != 11)
            throw ParseError("manifest row needs 11 fields, got " + std::to_string(fields.size()),
                             lineno);
        ManifestRow row;
        row.id = fields[0];
        row.country = fields[1];
        row.continent = continent_from_name(fields[2]);
        row.lat = parse_double(fields[3], "lat");
        row.lon = parse_double(fields[4], "lon");
        if (fields[5] != "0" && fields[5] != "1") throw ParseError("urban must be 0 or 1", lineno);
        row.urban = fields[5] == "1";
        row.raw_wealth = parse_double(fields[6], "raw_wealth");
        row.norm_wealth = parse_double(fields[7], "norm_wealth");
        row.day_path = fields[8];
        row.night_path = fields[9];
        row.split = split_from_name(fields[10]);

        if (row.id.empty()) throw ParseError("empty example id", lineno);
        if (!seen_ids.insert(row.id).second)
            throw ParseError("duplicate example id '" + row.id + "'", lineno);
        if (row.lat < -90.0 || row.lat > 90.0 || row.lon < -180.0 || row.lon > 180.0)
            throw ParseError("coordinates out of range", lineno);
        if (row.norm_wealth < -2.0 || row.norm_wealth > 2.0)
            throw ParseError("norm_wealth outside [-2, 2]", lineno);
        if (check_tiles) {
            for (const auto* p : {&row.day_path, &row.night_path})
                if (!std::filesystem::exists(manifest.resolve(*p)))
                    throw ParseError("referenced tile missing: " + *p, lineno);
        }
        manifest.rows.push_back(std::move(row));
    }
    return manifest;
}

}  // namespace povsat
