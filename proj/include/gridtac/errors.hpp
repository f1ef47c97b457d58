#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gridtac {

/// Input violates an operation's precondition (dimension mismatch, bad range).
class InvalidInput : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration value outside its documented range, or an unusable reference.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Parse failure in a text format; carries the 1-based line number.
class ParseError : public std::runtime_error
{
public:
  ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line)
  {
  }

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// The static solver ran out of iterations before reaching tolerance.
class SolverError : public std::runtime_error
{
public:
  SolverError(const std::string& what, double best_residual)
    : std::runtime_error(what + " (best residual " + std::to_string(best_residual) + ")"),
      best_residual_(best_residual)
  {
  }

  double best_residual() const noexcept { return best_residual_; }

private:
  double best_residual_;
};

/// A state machine found itself in a state it can never legally reach.
class InvariantViolation : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace gridtac
