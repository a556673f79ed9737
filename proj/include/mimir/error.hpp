#pragma once

#include <stdexcept>
#include <string>

namespace mimir {

/// Bad input: invalid configuration, shape mismatch, out-of-range argument.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File was readable but its contents violate the expected binary or text format.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mimir
