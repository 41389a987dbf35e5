#pragma once

#include <stdexcept>
#include <string>

namespace doubling {

/// Precondition on an argument was violated (out-of-range angle, zero count, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input lies outside the region where a constructive formula applies.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Brunn-Minkowski exponent does not exist for the given measures.
class NoSolution : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejection sampling would need too many draws to be practical.
class SetTooSmall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Grid cache file failed validation.
class CorruptCache : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace doubling
