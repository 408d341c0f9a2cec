#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mpd {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OverlapViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularMatrix : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonConvergence : std::runtime_error {
    std::vector<double> last_iterate;
    NonConvergence(const std::string& msg, std::vector<double> iter)
        : std::runtime_error(msg), last_iterate(std::move(iter)) {}
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mpd
