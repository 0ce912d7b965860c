#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace phasefield {

// Base class for errors raised by the spectral substrate and the solver.
class SpectralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A field that should be conjugate-symmetric (real-valued) is not.
class SymmetryError : public SpectralError {
public:
    using SpectralError::SpectralError;
};

// An operation requiring a mean-zero field was given one with coeff(0) != 0.
class MeanZeroError : public SpectralError {
public:
    using SpectralError::SpectralError;
};

// Grid mismatch or cutoff exceeding grid capacity.
class GridError : public SpectralError {
public:
    using SpectralError::SpectralError;
};

// The time stepper produced a non-finite or runaway state.
class DivergenceError : public SpectralError {
public:
    DivergenceError(const std::string& what, long step)
        : SpectralError(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

// Invalid run configuration; carries the offending field name.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Malformed snapshot file; carries the byte offset of the problem.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace phasefield
