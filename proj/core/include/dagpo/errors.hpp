#pragma once

#include <stdexcept>
#include <string>

namespace dagpo {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Graph handed to an ordering routine contains a directed cycle.
struct CycleDetected : Error {
    using Error::Error;
};

// Requested tensor or encoding dimension is unusable (zero, odd, negative).
struct InvalidDim : Error {
    using Error::Error;
};

// Two tensors or graph containers disagree on shape.
struct DimensionMismatch : Error {
    using Error::Error;
};

// A probability vector has non-finite entries or sums to zero.
struct DegenerateDistribution : Error {
    using Error::Error;
};

// Enumerating a search space would exceed the configured cap.
struct SpaceTooLarge : Error {
    using Error::Error;
};

// Graph violates the structural rules of its search space.
struct InvalidArchitecture : Error {
    using Error::Error;
};

// Malformed input text (JSON, JSONL, config file).
struct ParseError : Error {
    using Error::Error;
};

// Numeric value outside its documented range.
struct RangeError : Error {
    using Error::Error;
};

// Config key is unknown or a lookup key is malformed.
struct KeyError : Error {
    using Error::Error;
};

// Benchmark table has no row for a requested architecture.
struct MissingEntry : Error {
    using Error::Error;
};

// Dataset file contained zero usable records.
struct EmptyDataset : Error {
    using Error::Error;
};

// An operation that needs at least one sample received none.
struct EmptyPool : Error {
    using Error::Error;
};

// Metric asked for a dimensionality the implementation does not cover.
struct DimensionUnsupported : Error {
    using Error::Error;
};

// File could not be opened, read, or written.
struct IoError : Error {
    using Error::Error;
};

// Checkpoint bytes are truncated, corrupt, or of an unknown version.
struct CheckpointError : Error {
    using Error::Error;
};

} // namespace dagpo
