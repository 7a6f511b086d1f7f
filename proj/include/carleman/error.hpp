#pragma once

#include <stdexcept>
#include <string>

namespace carleman {

/// Thrown when a caller passes arguments outside an operation's domain.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown that should not happen for valid inputs.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what, int iteration = -1)
        : std::runtime_error(iteration < 0 ? what
                                           : "iteration " + std::to_string(iteration) + ": " + what),
          iteration_(iteration) {}

    /// Outer iteration index at which the failure happened, or -1.
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InputError(message);
}

}  // namespace detail
}  // namespace carleman
