#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace semfm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid argument or precondition violation (usage error).
class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

/// Input file could not be parsed. Carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line)
    {
    }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Filesystem failure. The message names the path.
class IoError : public Error {
public:
    IoError(const std::string& msg, std::string path)
        : Error(msg + ": " + path), path_(std::move(path))
    {
    }
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Numerical failure (non-convergence, singular system, ...).
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

/// Eigensolver failed to converge all requested pairs.
class ConvergenceError : public NumericError {
public:
    ConvergenceError(const std::string& msg, int achieved)
        : NumericError(msg + " (converged " + std::to_string(achieved) + ")"), achieved_(achieved)
    {
    }
    int achieved() const noexcept { return achieved_; }

private:
    int achieved_;
};

/// Non-fatal diagnostics collected by operations that clamp or soften inputs.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string msg)
{
    if (sink) sink->push_back(std::move(msg));
}

} // namespace semfm
