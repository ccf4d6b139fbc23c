#pragma once

#include <stdexcept>
#include <string>

namespace chaincast {

// Raised when an input file or trace fails validation (bad token, short
// trace, malformed model file). CLI maps this to exit code 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when an optimization loop produces a non-finite loss. Carries the
// epoch at which the divergence was detected. CLI maps this to exit code 4.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& msg, int epoch)
        : std::runtime_error(msg + " (epoch " + std::to_string(epoch) + ")"),
          epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

}  // namespace chaincast
