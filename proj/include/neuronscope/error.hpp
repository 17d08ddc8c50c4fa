#pragma once

#include <stdexcept>
#include <string>

namespace neuronscope {

// Raised for bad or inconsistent input data (malformed files, missing ids,
// bounds violations). The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised for invalid parameters supplied by the caller. The CLI maps it to
// exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace neuronscope
