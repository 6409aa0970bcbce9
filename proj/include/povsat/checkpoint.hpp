#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "povsat/errors.hpp"
#include "povsat/nn.hpp"
#include "povsat/util.hpp"

namespace povsat {

// On-disk model snapshot.
//
// Layout (all integers and floats little-endian):
//   magic "PVSAT" | u32 version | u32 layer_count | u32 dims[layer_count+1]
//   | u32 activation tag | u32 epoch | f32 tune_rmse
//   | f32 params, per layer: weights row-major, then bias
struct Checkpoint {
    std::uint32_t format_version = 1;
    std::vector<std::uint32_t> layer_dims;  // [input, hidden..., 1]
    Activation activation = Activation::Relu;
    std::uint32_t epoch = 0;
    float tune_rmse = 0.0f;
    std::vector<float> params;

    std::size_t expected_param_count() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i)
            n += static_cast<std::size_t>(layer_dims[i]) * layer_dims[i + 1] + layer_dims[i + 1];
        return n;
    }
};

namespace detail {

inline constexpr char kCheckpointMagic[5] = {'P', 'V', 'S', 'A', 'T'};

inline void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_f32(std::string& out, float f) {
    put_u32(out, std::bit_cast<std::uint32_t>(f));
}

struct ByteReader {
    const std::string& bytes;
    std::size_t pos = 0;

    bool eof() const { return pos >= bytes.size(); }
    std::size_t remaining() const { return bytes.size() - pos; }

    std::uint32_t u32(const char* what) {
        if (remaining() < 4)
            throw CheckpointError(CheckpointErrorKind::Truncated,
                                  std::string("checkpoint truncated while reading ") + what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }

    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.layer_dims.size() < 2) throw ConfigError("checkpoint needs at least [input, output] dims");
    if (ckpt.params.size() != ckpt.expected_param_count())
        throw ShapeError("checkpoint parameter count does not match dims");
    std::string out;
    out.reserve(32 + 4 * ckpt.params.size());
    out.append(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
    detail::put_u32(out, ckpt.format_version);
    detail::put_u32(out, static_cast<std::uint32_t>(ckpt.layer_dims.size() - 1));
    for (std::uint32_t d : ckpt.layer_dims) detail::put_u32(out, d);
    detail::put_u32(out, static_cast<std::uint32_t>(ckpt.activation));
    detail::put_u32(out, ckpt.epoch);
    detail::put_f32(out, ckpt.tune_rmse);
    for (float p : ckpt.params) detail::put_f32(out, p);
    return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < sizeof(detail::kCheckpointMagic) ||
        std::memcmp(bytes.data(), detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic)) != 0)
        throw CheckpointError(CheckpointErrorKind::BadMagic, "not a checkpoint file (bad magic)");

    detail::ByteReader rd{bytes, sizeof(detail::kCheckpointMagic)};
    Checkpoint ckpt;
    ckpt.format_version = rd.u32("version");
    if (ckpt.format_version != 1)
        throw CheckpointError(CheckpointErrorKind::UnsupportedVersion,
                              "unsupported checkpoint version " + std::to_string(ckpt.format_version));
    const std::uint32_t layer_count = rd.u32("layer count");
    if (layer_count == 0 || layer_count > 1024)
        throw CheckpointError(CheckpointErrorKind::BadHeader, "implausible layer count");
    ckpt.layer_dims.resize(layer_count + 1);
    for (auto& d : ckpt.layer_dims) {
        d = rd.u32("layer dims");
        if (d == 0) throw CheckpointError(CheckpointErrorKind::BadHeader, "zero layer dim");
    }
    if (ckpt.layer_dims.back() != 1)
        throw CheckpointError(CheckpointErrorKind::BadHeader, "output dim must be 1");
    const std::uint32_t act = rd.u32("activation");
    if (act > 1) throw CheckpointError(CheckpointErrorKind::BadHeader, "unknown activation tag");
    ckpt.activation = static_cast<Activation>(act);
    ckpt.epoch = rd.u32("epoch");
    ckpt.tune_rmse = rd.f32("tune rmse");
    if (!(ckpt.tune_rmse >= 0.0f))
        throw CheckpointError(CheckpointErrorKind::BadHeader, "tune rmse must be nonnegative");

    const std::size_t n = ckpt.expected_param_count();
    if (rd.remaining() < 4 * n)
        throw CheckpointError(CheckpointErrorKind::Truncated,
                              "checkpoint payload short: expected " + std::to_string(n) +
                                  " parameters, payload holds " + std::to_string(rd.remaining() / 4));
    ckpt.params.resize(n);
    for (auto& p : ckpt.params) {
        p = rd.f32("parameters");
        if (!std::isfinite(p))
            throw CheckpointError(CheckpointErrorKind::NonFinite, "non-finite parameter in checkpoint");
    }
    if (!rd.eof())
        throw CheckpointError(CheckpointErrorKind::TrailingData,
                              std::to_string(rd.remaining()) + " trailing bytes after parameters");
    return ckpt;
}

inline Checkpoint checkpoint_from_model(const MlpRegressor& model, std::uint32_t epoch,
                                        float tune_rmse) {
    Checkpoint ckpt;
    ckpt.activation = model.activation;
    ckpt.epoch = epoch;
    ckpt.tune_rmse = tune_rmse;
    for (std::size_t d : model.layer_dims()) ckpt.layer_dims.push_back(static_cast<std::uint32_t>(d));
    ckpt.params.reserve(model.param_count());
    for (const auto& layer : model.layers) {
        for (double w : layer.weights.data) ckpt.params.push_back(static_cast<float>(w));
        for (double b : layer.bias) ckpt.params.push_back(static_cast<float>(b));
    }
    return ckpt;
}

inline MlpRegressor model_from_checkpoint(const Checkpoint& ckpt) {
    MlpRegressor model;
    model.activation = ckpt.activation;
    model.input_dim = ckpt.layer_dims.front();
    std::size_t pos = 0;
    for (std::size_t i = 0; i + 1 < ckpt.layer_dims.size(); ++i) {
        LinearLayer layer(ckpt.layer_dims[i + 1], ckpt.layer_dims[i]);
        for (double& w : layer.weights.data) w = static_cast<double>(ckpt.params[pos++]);
        for (double& b : layer.bias) b = static_cast<double>(ckpt.params[pos++]);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    atomic_write_file(path, serialize_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(read_file(path));
}

}  // namespace povsat
