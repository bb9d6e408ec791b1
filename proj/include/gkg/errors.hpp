#pragma once

#include <stdexcept>
#include <string>

namespace gkg {

// Bad configuration, manifest or command usage. The CLI maps this to exit
// code 2; anything else escaping to main is an internal failure (exit 1).
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gkg
