#pragma once

#include <stdexcept>
#include <string>

namespace mfdl {

// Bad argument or violated precondition (maps to CLI exit code 1).
class InvalidArgument : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// An integrand produced NaN or Inf on a quadrature node.
class EvaluationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A state for which a correlation is undefined (zero length).
class DegenerateState : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Fixed-point iteration or root search failed. Carries the last iterate so
// callers can report where the divergent regime was detected.
class ConvergenceError : public std::runtime_error {
  public:
    ConvergenceError(const std::string& what, double last_iterate, int iterations)
        : std::runtime_error(what), last_iterate_(last_iterate), iterations_(iterations) {}

    double last_iterate() const noexcept { return last_iterate_; }
    int iterations() const noexcept { return iterations_; }

  private:
    double last_iterate_;
    int iterations_;
};

}  // namespace mfdl
