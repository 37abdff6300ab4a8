#pragma once

#include <stdexcept>
#include <string>

namespace xrv {

// Shape/dimension violations (mismatched operands, invalid axes, bad specs).
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration values (model specs, training settings, CLI options).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// API contract violations (non-scalar loss, missing gradient, label out of range).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed persisted artifacts (checkpoints, manifests, config files).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// File-system and codec failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Training produced a non-finite loss.
struct DivergedError : std::runtime_error {
    DivergedError(const std::string& what, int epoch, int step)
        : std::runtime_error(what), epoch(epoch), step(step) {}
    int epoch;
    int step;
};

}  // namespace xrv
