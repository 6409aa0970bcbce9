#pragma once

#include <cmath>
#include <cstdint>

#include "povsat/errors.hpp"
#include "povsat/image.hpp"
#include "povsat/rng.hpp"

namespace povsat {

// Train-time augmentation settings. Each enabled transform is applied
// independently with apply_probability, in order flip -> rotate -> noise.
struct AugmentationConfig {
    bool enable_flip = true;
    bool enable_rot90 = true;
    bool enable_noise = true;
    double noise_sigma = 2.5;
    double apply_probability = 0.5;
    std::uint64_t seed = 0;

    void validate() const {
        if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
        if (apply_probability < 0.0 || apply_probability > 1.0)
            throw ConfigError("apply_probability must be in [0, 1]");
    }
};

// 180 degree rotation followed by a mirror across the vertical axis; the
// composition is a flip over the horizontal midline: out(r,c) = in(H-1-r, c).
inline ImageTile flip_vertical(const ImageTile& tile) {
    tile.validate();
    ImageTile out = tile;
    const std::size_t ch = tile.channels();
    for (std::size_t r = 0; r < tile.height; ++r)
        for (std::size_t c = 0; c < tile.width; ++c)
            for (std::size_t k = 0; k < ch; ++k)
                out.at(r, c, k) = tile.at(tile.height - 1 - r, c, k);
    return out;
}

// 90 degrees counter-clockwise: out(r,c) = in(c, W-1-r). Square tiles only.
inline ImageTile rotate90ccw(const ImageTile& tile) {
    tile.validate();
    if (tile.width != tile.height)
        throw ShapeError("rotate90ccw requires a square tile, got " + std::to_string(tile.width) +
                         "x" + std::to_string(tile.height));
    ImageTile out = tile;
    const std::size_t ch = tile.channels();
    for (std::size_t r = 0; r < tile.height; ++r)
        for (std::size_t c = 0; c < tile.width; ++c)
            for (std::size_t k = 0; k < ch; ++k)
                out.at(r, c, k) = tile.at(c, tile.width - 1 - r, k);
    return out;
}

// Adds iid N(0, sigma^2) per pixel, rounds, clamps to [0, 255].
inline ImageTile gaussian_noise(const ImageTile& tile, double sigma, Rng& rng) {
    tile.validate();
    if (sigma < 0.0) throw ConfigError("gaussian_noise: sigma must be >= 0");
    ImageTile out = tile;
    if (sigma == 0.0) return out;
    for (auto& p : out.pixels) {
        const double v = static_cast<double>(p) + rng.normal(0.0, sigma);
        const double rounded = std::floor(v + 0.5);
        p = static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, rounded)));
    }
    return out;
}

// Randomized composition. Consumes one coin per enabled transform, then the
// noise draws, so the stream layout is stable for a given config.
inline ImageTile augment(const ImageTile& tile, const AugmentationConfig& config, Rng& rng) {
    config.validate();
    ImageTile out = tile;
    if (config.enable_flip && rng.bernoulli(config.apply_probability)) out = flip_vertical(out);
    if (config.enable_rot90 && rng.bernoulli(config.apply_probability)) out = rotate90ccw(out);
    if (config.enable_noise && rng.bernoulli(config.apply_probability))
        out = gaussian_noise(out, config.noise_sigma, rng);
    return out;
}

}  // namespace povsat
