#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nanolaser {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition or input-validation failure (bad parameters, bad window, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// The numerics could not produce an answer: step underflow, blow-up,
/// missing pulse, failed fit.
class NumericalError : public Error {
public:
    using Error::Error;
};

class FitError : public NumericalError {
public:
    enum class Kind { did_not_converge, singular_jacobian, insufficient_data };

    FitError(Kind kind, const std::string& what) : NumericalError(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Reading or writing a file failed.
class IoError : public Error {
public:
    using Error::Error;
};

/// Strict-schema validation failure; carries every issue found, not just the first.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> issues)
        : Error(join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string out = "invalid configuration";
        for (const auto& i : issues) {
            out += "; ";
            out += i;
        }
        return out;
    }

    std::vector<std::string> issues_;
};

}  // namespace nanolaser
