#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace povsat {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension or length disagreement between values that must line up.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration value (zero dims, negative sigma, bad ratios, ...).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
    ConfigError(const std::string& msg, int line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    int line() const { return line_; }

private:
    int line_ = 0;
};

// Raster (PGM/PPM) parse failures, one kind per distinct failure mode.
enum class RasterErrorKind {
    BadMagic,
    BadHeader,
    BadMaxval,
    Truncated,
    KindMismatch,
};

class RasterError : public Error {
public:
    RasterError(RasterErrorKind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    RasterErrorKind kind() const { return kind_; }

private:
    RasterErrorKind kind_;
};

// Checkpoint file failures, one kind per distinct failure mode.
enum class CheckpointErrorKind {
    BadMagic,
    UnsupportedVersion,
    BadHeader,
    Truncated,
    TrailingData,
    NonFinite,
};

class CheckpointError : public Error {
public:
    CheckpointError(CheckpointErrorKind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    CheckpointErrorKind kind() const { return kind_; }

private:
    CheckpointErrorKind kind_;
};

// Manifest / CSV / config-file parse failure.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
    ParseError(const std::string& msg, int line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    int line() const { return line_; }

private:
    int line_ = 0;
};

// Not enough examples to satisfy a request; carries the counts.
class ShortageError : public Error {
public:
    ShortageError(const std::string& what_short, std::size_t requested, std::size_t available)
        : Error(what_short + ": requested " + std::to_string(requested) + ", available " +
                std::to_string(available)),
          requested_(requested),
          available_(available) {}
    std::size_t requested() const { return requested_; }
    std::size_t available() const { return available_; }

private:
    std::size_t requested_;
    std::size_t available_;
};

// A computation produced NaN/Inf.
class NonFiniteError : public Error {
public:
    explicit NonFiniteError(const std::string& msg) : Error(msg) {}
};

// Training loss became non-finite.
class DivergenceError : public Error {
public:
    explicit DivergenceError(int epoch)
        : Error("training diverged: non-finite loss in epoch " + std::to_string(epoch)),
          epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

// Input distribution carries no usable information (e.g. all values identical).
class DegenerateDataError : public Error {
public:
    explicit DegenerateDataError(const std::string& msg) : Error(msg) {}
};

// A catalog that must be nonempty is empty.
class EmptyCatalogError : public Error {
public:
    explicit EmptyCatalogError(const std::string& msg) : Error(msg) {}
};

// Filesystem failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Operation asked for outside its supported regime.
class UnsupportedError : public Error {
public:
    explicit UnsupportedError(const std::string& msg) : Error(msg) {}
};

}  // namespace povsat
