#pragma once

#include <stdexcept>
#include <string>

namespace coverlab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A point or parameter lies outside the domain an operation is defined on.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Random generation (e.g. rejection sampling of peaks) gave up.
class GenerationError : public Error {
public:
    using Error::Error;
};

/// Matrix or signal shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A cache or gradient container does not belong to the parameters it is used with.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// Caller-supplied data violates an operation's precondition.
class InputError : public Error {
public:
    using Error::Error;
};

/// A controller produced an invalid action during an episode.
class EpisodeError : public Error {
public:
    EpisodeError(int step, const std::string& what)
        : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
    int step() const noexcept { return step_; }

private:
    int step_;
};

/// Training hit a non-finite loss.
class TrainingError : public Error {
public:
    TrainingError(int epoch, int batch, const std::string& what)
        : Error("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": " + what),
          epoch_(epoch), batch_(batch) {}
    int epoch() const noexcept { return epoch_; }
    int batch() const noexcept { return batch_; }

private:
    int epoch_;
    int batch_;
};

/// A file could not be parsed as the artifact it claims to be.
class FormatError : public Error {
public:
    using Error::Error;
};

/// An artifact was written by an incompatible format version.
class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

/// A run configuration is malformed or violates the schema.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace coverlab
