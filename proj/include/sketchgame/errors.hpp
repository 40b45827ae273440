#pragma once

#include <stdexcept>
#include <string>

namespace sketchgame {

// Exit codes: 0 success, 2 config error, 3 gate failure, 4 numerical abort.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
    static constexpr int exit_code = 2;
};

struct GateError : std::runtime_error {
    explicit GateError(const std::string& msg) : std::runtime_error(msg) {}
    static constexpr int exit_code = 3;
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
    static constexpr int exit_code = 4;
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
    static constexpr int exit_code = 1;
};

}  // namespace sketchgame
