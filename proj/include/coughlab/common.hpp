#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace coughlab {

using Scalar = double;
using Index = Eigen::Index;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Error taxonomy. The CLI maps these to its exit-code contract:
// ConfigError -> 1, DataError (and subclasses) -> 2, NumericError -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

// Dimension mismatch between data and what a model or operation expects.
struct ShapeError : DataError {
    using DataError::DataError;
};

struct WavFormatError : DataError {
    using DataError::DataError;
};

struct UnsupportedCodecError : DataError {
    using DataError::DataError;
};

struct EmptyAudioError : DataError {
    using DataError::DataError;
};

struct ManifestError : DataError {
    using DataError::DataError;
};

struct ChecksumError : DataError {
    using DataError::DataError;
};

struct VersionError : DataError {
    using DataError::DataError;
};

}  // namespace coughlab
