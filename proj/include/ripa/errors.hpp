// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ripa {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Configuration or input violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Bad argument to an operation (empty sets, counts out of range).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Grid too coarse or propagation would alias.
class SamplingError : public Error {
public:
    using Error::Error;
};

/// Ray matrix outside the stable region.
class StabilityError : public Error {
public:
    StabilityError(const std::string& what, double half_trace)
        : Error(what), half_trace_(half_trace) {}
    double half_trace() const noexcept { return half_trace_; }

private:
    double half_trace_;
};

/// Nonlinear fit failed to converge.
class FitError : public Error {
public:
    FitError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// More than one candidate peak inside a fit window.
class AmbiguityError : public Error {
public:
    AmbiguityError(const std::string& what, int peaks) : Error(what), peaks_(peaks) {}
    int peaks() const noexcept { return peaks_; }

private:
    int peaks_;
};

/// Fringe contrast below the configured floor.
class LowContrastError : public FitError {
public:
    using FitError::FitError;
};

/// Requested span or position cannot be represented.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Two targets compiled onto the same frequency channel.
class CollisionError : public Error {
public:
    CollisionError(const std::string& what, std::size_t first, std::size_t second)
        : Error(what), first_(first), second_(second) {}
    std::size_t first() const noexcept { return first_; }
    std::size_t second() const noexcept { return second_; }

private:
    std::size_t first_;
    std::size_t second_;
};

/// Input outside the mathematical domain (log of nonpositive, kappa + l >= 1).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Trace lacks the expected shape (thresholds never crossed).
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Requested work exceeds a configured memory cap.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// Degenerate design matrix.
class RankError : public Error {
public:
    using Error::Error;
};

/// Modulation depth outside the first-order expansion's validity.
class ModelValidityError : public Error {
public:
    using Error::Error;
};

/// Aggregated calibration failure naming the affected beams.
class CalibrationError : public Error {
public:
    CalibrationError(const std::string& what, std::vector<std::pair<int, int>> beams)
        : Error(what), beams_(std::move(beams)) {}
    const std::vector<std::pair<int, int>>& beams() const noexcept { return beams_; }

private:
    std::vector<std::pair<int, int>> beams_;
};

}  // namespace ripa
