#pragma once

#include <stdexcept>
#include <string>

namespace nftrap {

// Domain errors thrown by the numerical routines. All derive from
// std::runtime_error so callers can catch coarsely; the CLI maps each
// type to a one-line machine-parsable code.

struct BracketingFailure : std::runtime_error {
    explicit BracketingFailure(const std::string& what) : std::runtime_error(what) {}
};

struct NoMinimumFound : std::runtime_error {
    explicit NoMinimumFound(const std::string& what) : std::runtime_error(what) {}
};

struct LevelAboveDepth : std::runtime_error {
    explicit LevelAboveDepth(const std::string& what) : std::runtime_error(what) {}
};

struct FitNonconvergence : std::runtime_error {
    explicit FitNonconvergence(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateData : std::runtime_error {
    explicit DegenerateData(const std::string& what) : std::runtime_error(what) {}
};

struct InsufficientScanRange : std::runtime_error {
    explicit InsufficientScanRange(const std::string& what) : std::runtime_error(what) {}
};

struct EnergyOutOfRange : std::runtime_error {
    explicit EnergyOutOfRange(const std::string& what) : std::runtime_error(what) {}
};

struct StepTooLarge : std::runtime_error {
    explicit StepTooLarge(const std::string& what) : std::runtime_error(what) {}
};

struct NonFiniteState : std::runtime_error {
    explicit NonFiniteState(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateObservation : std::runtime_error {
    explicit DegenerateObservation(const std::string& what) : std::runtime_error(what) {}
};

} // namespace nftrap
