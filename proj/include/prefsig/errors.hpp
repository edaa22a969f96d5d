#pragma once

#include <stdexcept>
#include <string>

namespace prefsig {

// Exit codes used by the CLI: 2 config, 3 backend, 4 training, 5 evaluation.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
    static constexpr int exit_code = 2;
};

struct BackendError : std::runtime_error {
    explicit BackendError(const std::string& msg) : std::runtime_error(msg) {}
    static constexpr int exit_code = 3;
};

struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
    static constexpr int exit_code = 4;
};

struct EvalError : std::runtime_error {
    explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
    static constexpr int exit_code = 5;
};

struct PersistenceError : std::runtime_error {
    explicit PersistenceError(const std::string& msg) : std::runtime_error(msg) {}
    static constexpr int exit_code = 2;
};

}  // namespace prefsig
