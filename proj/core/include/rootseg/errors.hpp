#pragma once

#include <stdexcept>
#include <string>

namespace rootseg {

// Bad user input: malformed files, dimension mismatches, out-of-range
// arguments. The CLI maps these to exit code 2.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// I/O failure on a path that was expected to be readable/writable.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training aborted (non-finite loss, empty dataset, ...).
class TrainError : public std::runtime_error {
public:
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace rootseg
