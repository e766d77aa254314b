#pragma once

#include <stdexcept>
#include <string>

namespace wavebf {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix sizes do not match.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A parameter lies outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, blow-up or a failed factorization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A matrix expected to be positive definite has too small eigenvalues.
/// Carries the numerical rank so callers can shrink a factor accordingly.
class RankDeficiencyError : public NumericalError {
 public:
  RankDeficiencyError(const std::string& what, int numerical_rank)
      : NumericalError(what), rank_(numerical_rank) {}
  int numerical_rank() const noexcept { return rank_; }

 private:
  int rank_;
};

class RankCollapseError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration entry; `key()` names the offending entry.
class ParseError : public Error {
 public:
  ParseError(std::string key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace wavebf
