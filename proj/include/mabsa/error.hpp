#pragma once

#include <stdexcept>
#include <string>

namespace mabsa {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct IndexError : Error {
    using Error::Error;
};
struct UsageError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct LoadError : Error {
    using Error::Error;
};
struct CapacityError : Error {
    using Error::Error;
};
struct TrainingError : Error {
    using Error::Error;
};

}  // namespace mabsa
