#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rest {

/// Input violated a documented precondition or invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A text input could not be parsed. Carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A training loss term became NaN or infinite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::string term, long step)
      : std::runtime_error("loss term '" + term + "' is not finite at step " + std::to_string(step)),
        term_(std::move(term)),
        step_(step) {}

  const std::string& term() const noexcept { return term_; }
  long step() const noexcept { return step_; }

 private:
  std::string term_;
  long step_;
};

}  // namespace rest
