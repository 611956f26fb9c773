#pragma once

#include <stdexcept>
#include <string>

namespace atd {

// Bad caller input: mismatched shapes, invalid flag values, infeasible
// parameters. The CLI maps these to exit code 1.
class ArgumentError : public std::invalid_argument {
public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

// Inconsistent or corrupt data: duplicate ids, missing passages, unreadable
// files, numerical blow-ups. The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Training produced a non-finite loss; carries the step at which it happened.
class DivergenceError : public DataError {
public:
  DivergenceError(const std::string& what, long long step)
      : DataError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long long step() const { return step_; }

private:
  long long step_;
};

} // namespace atd
