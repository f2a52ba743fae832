#pragma once

#include <stdexcept>
#include <string>

namespace cwm {

/// Violated precondition or malformed argument (dimension mismatch, bad range).
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical procedure failed (singular solve, non-convergent iteration).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cwm
