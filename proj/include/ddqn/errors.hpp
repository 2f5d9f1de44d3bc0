#pragma once

#include <stdexcept>
#include <string>

namespace ddqn {

// Bad input data: unreadable files, malformed rows, degenerate series.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or violated precondition on caller-supplied values.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Non-finite values surfaced during forward/backward passes or training.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Checkpoint files with an unknown format tag or version.
class VersionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Misuse of a stateful object (stepping a finished episode, sampling an underfull buffer).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace ddqn
