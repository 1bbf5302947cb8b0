#pragma once

#include <stdexcept>
#include <string>

namespace bstar {

/// Bad input: violated precondition, malformed file, inconsistent grids.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced NaN/Inf or failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Energy fell below -m N / 2: the requested charge is above the critical charge.
class SupercriticalError : public NumericalError {
 public:
  SupercriticalError(const std::string& what, double energy, int iteration)
      : NumericalError(what), energy_(energy), iteration_(iteration) {}
  double energy() const { return energy_; }
  int iteration() const { return iteration_; }

 private:
  double energy_;
  int iteration_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace bstar
