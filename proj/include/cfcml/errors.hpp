#pragma once
#include <stdexcept>
#include <string>

namespace cfcml {

// Failure taxonomy shared across the library. Callers catch these; anything
// that escapes as std::logic_error is a bug.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownAttribute : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyValue : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidDims : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CorruptBlob : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingleClassBatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateBatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UndefinedMetric : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cfcml
