#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "povsat/errors.hpp"
#include "povsat/util.hpp"

namespace povsat {

enum class TileKind : std::uint8_t { Night, Day };

inline std::size_t tile_channels(TileKind kind) { return kind == TileKind::Night ? 1 : 3; }

inline std::string tile_kind_name(TileKind kind) { return kind == TileKind::Night ? "night" : "day"; }

// A single raster tile. Night tiles are single-channel intensity, day tiles
// 3-channel RGB; pixels are row-major and channel-interleaved in [0, 255].
struct ImageTile {
    std::string id;
    TileKind kind = TileKind::Night;
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;
    double lat = 0.0;
    double lon = 0.0;

    std::size_t channels() const { return tile_channels(kind); }

    std::uint8_t at(std::size_t r, std::size_t c, std::size_t ch = 0) const {
        return pixels[(r * width + c) * channels() + ch];
    }
    std::uint8_t& at(std::size_t r, std::size_t c, std::size_t ch = 0) {
        return pixels[(r * width + c) * channels() + ch];
    }

    void validate() const {
        if (width == 0 || height == 0) throw ConfigError("tile dims must be positive");
        if (pixels.size() != width * height * channels())
            throw ShapeError("tile pixel count does not match dims");
        if (lat < -90.0 || lat > 90.0 || lon < -180.0 || lon > 180.0)
            throw ConfigError("tile coordinates out of range");
    }

    bool operator==(const ImageTile& o) const {
        return kind == o.kind && width == o.width && height == o.height && pixels == o.pixels;
    }
};

inline ImageTile make_tile(std::string id, TileKind kind, std::size_t width, std::size_t height,
                           double lat = 0.0, double lon = 0.0) {
    ImageTile t;
    t.id = std::move(id);
    t.kind = kind;
    t.width = width;
    t.height = height;
    t.lat = lat;
    t.lon = lon;
    t.pixels.assign(width * height * t.channels(), 0);
    t.validate();
    return t;
}

namespace detail {

// Reads the next header token, skipping whitespace and '#' comments.
inline std::string netpbm_token(const std::string& bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        const char c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw RasterError(RasterErrorKind::BadHeader, "unexpected end of header");
    return bytes.substr(start, pos - start);
}

inline std::size_t netpbm_dim(const std::string& bytes, std::size_t& pos, const char* what) {
    const std::string tok = netpbm_token(bytes, pos);
    long long v = 0;
    try {
        v = parse_int(tok, what);
    } catch (const ParseError&) {
        throw RasterError(RasterErrorKind::BadHeader, std::string("bad ") + what + ": '" + tok + "'");
    }
    if (v <= 0 || v > 1 << 20)
        throw RasterError(RasterErrorKind::BadHeader, std::string(what) + " out of range");
    return static_cast<std::size_t>(v);
}

}  // namespace detail

// Parses a binary PGM (P5, night) or PPM (P6, day) with maxval 255.
inline ImageTile parse_tile(const std::string& bytes, TileKind expected_kind, std::string id = "",
                            double lat = 0.0, double lon = 0.0) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw RasterError(RasterErrorKind::BadMagic, "not a binary PGM/PPM (bad magic)");
    const TileKind actual = bytes[1] == '5' ? TileKind::Night : TileKind::Day;
    if (actual != expected_kind)
        throw RasterError(RasterErrorKind::KindMismatch,
                          "expected a " + tile_kind_name(expected_kind) + " tile but file is " +
                              (actual == TileKind::Night ? "P5 (night)" : "P6 (day)"));

    std::size_t pos = 2;
    const std::size_t width = detail::netpbm_dim(bytes, pos, "width");
    const std::size_t height = detail::netpbm_dim(bytes, pos, "height");
    const std::size_t maxval = detail::netpbm_dim(bytes, pos, "maxval");
    if (maxval != 255)
        throw RasterError(RasterErrorKind::BadMaxval, "maxval must be 255, got " + std::to_string(maxval));
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw RasterError(RasterErrorKind::BadHeader, "missing whitespace after maxval");
    ++pos;

    ImageTile tile = make_tile(std::move(id), actual, width, height, lat, lon);
    const std::size_t need = tile.pixels.size();
    if (bytes.size() - pos < need)
        throw RasterError(RasterErrorKind::Truncated,
                          "payload truncated: need " + std::to_string(need) + " bytes, have " +
                              std::to_string(bytes.size() - pos));
    if (bytes.size() - pos > need)
        throw RasterError(RasterErrorKind::BadHeader, "trailing bytes after pixel payload");
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), tile.pixels.begin());
    return tile;
}

inline std::string serialize_tile(const ImageTile& tile) {
    tile.validate();
    std::string out = tile.kind == TileKind::Night ? "P5\n" : "P6\n";
    out += std::to_string(tile.width) + " " + std::to_string(tile.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(tile.pixels.data()), tile.pixels.size());
    return out;
}

inline ImageTile read_tile(const std::filesystem::path& path, TileKind expected_kind,
                           std::string id = "", double lat = 0.0, double lon = 0.0) {
    if (id.empty()) id = path.stem().string();
    return parse_tile(read_file(path), expected_kind, std::move(id), lat, lon);
}

inline void write_tile(const ImageTile& tile, const std::filesystem::path& path) {
    atomic_write_file(path, serialize_tile(tile));
}

// Area-average downsampling to a square target x target raster; each output
// pixel averages its (possibly fractional) source footprint, rounded half-up.
inline ImageTile downsample(const ImageTile& tile, std::size_t target) {
    tile.validate();
    if (target == 0) throw ConfigError("downsample target must be positive");
    if (target > tile.width || target > tile.height)
        throw ConfigError("downsample target " + std::to_string(target) + " exceeds source " +
                          std::to_string(tile.width) + "x" + std::to_string(tile.height));

    ImageTile out = make_tile(tile.id, tile.kind, target, target, tile.lat, tile.lon);
    const std::size_t ch = tile.channels();
    const double sy = static_cast<double>(tile.height) / static_cast<double>(target);
    const double sx = static_cast<double>(tile.width) / static_cast<double>(target);

    for (std::size_t r = 0; r < target; ++r) {
        const double y0 = static_cast<double>(r) * sy;
        const double y1 = static_cast<double>(r + 1) * sy;
        const std::size_t ry0 = static_cast<std::size_t>(y0);
        const std::size_t ry1 = std::min(tile.height, static_cast<std::size_t>(std::ceil(y1)));
        for (std::size_t c = 0; c < target; ++c) {
            const double x0 = static_cast<double>(c) * sx;
            const double x1 = static_cast<double>(c + 1) * sx;
            const std::size_t rx0 = static_cast<std::size_t>(x0);
            const std::size_t rx1 = std::min(tile.width, static_cast<std::size_t>(std::ceil(x1)));
            for (std::size_t k = 0; k < ch; ++k) {
                double acc = 0.0, area = 0.0;
                for (std::size_t iy = ry0; iy < ry1; ++iy) {
                    const double wy = std::min(y1, static_cast<double>(iy + 1)) -
                                      std::max(y0, static_cast<double>(iy));
                    if (wy <= 0.0) continue;
                    for (std::size_t ix = rx0; ix < rx1; ++ix) {
                        const double wx = std::min(x1, static_cast<double>(ix + 1)) -
                                          std::max(x0, static_cast<double>(ix));
                        if (wx <= 0.0) continue;
                        acc += wy * wx * static_cast<double>(tile.at(iy, ix, k));
                        area += wy * wx;
                    }
                }
                const double mean = acc / area;
                const double rounded = std::floor(mean + 0.5);
                out.at(r, c, k) = static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, rounded)));
            }
        }
    }
    return out;
}

// Feature vector: row-major, channel-interleaved intensities scaled to [0, 1].
inline std::vector<double> flatten(const ImageTile& tile) {
    tile.validate();
    std::vector<double> out(tile.pixels.size());
    for (std::size_t i = 0; i < tile.pixels.size(); ++i)
        out[i] = static_cast<double>(tile.pixels[i]) / 255.0;
    return out;
}

}  // namespace povsat
