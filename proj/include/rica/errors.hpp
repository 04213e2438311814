#pragma once

#include <stdexcept>
#include <string>

namespace rica {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct SingularMatrix : Error {
  explicit SingularMatrix(const std::string& msg = "matrix is singular") : Error(msg) {}
};

// Raised by the canonical-form map when the column dominance ordering has a
// tie within tolerance (the map would not be continuous there).
struct AmbiguousOrdering : Error {
  explicit AmbiguousOrdering(const std::string& msg = "dominance ordering tie") : Error(msg) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& msg = "dimension mismatch") : Error(msg) {}
};

struct InvalidParams : Error {
  explicit InvalidParams(const std::string& msg = "invalid parameters") : Error(msg) {}
};

struct DomainError : Error {
  explicit DomainError(const std::string& msg = "argument outside domain") : Error(msg) {}
};

struct DegenerateSample : Error {
  explicit DegenerateSample(const std::string& msg = "sample is degenerate") : Error(msg) {}
};

struct NonConvergence : Error {
  explicit NonConvergence(const std::string& msg = "iteration did not converge") : Error(msg) {}
};

struct DivergentMoment : Error {
  explicit DivergentMoment(const std::string& msg = "moment does not exist") : Error(msg) {}
};

struct QuadratureFailure : Error {
  explicit QuadratureFailure(const std::string& msg = "quadrature failed") : Error(msg) {}
};

struct RankDeficientData : Error {
  explicit RankDeficientData(const std::string& msg = "data matrix is rank deficient") : Error(msg) {}
};

struct DegenerateKurtoses : Error {
  explicit DegenerateKurtoses(const std::string& msg = "generalized kurtoses coincide") : Error(msg) {}
};

struct BudgetExceeded : Error {
  explicit BudgetExceeded(const std::string& msg = "resource budget exceeded") : Error(msg) {}
};

struct SingularPerturbation : Error {
  explicit SingularPerturbation(const std::string& msg = "perturbed matrix is singular") : Error(msg) {}
};

struct SingularUpdate : Error {
  explicit SingularUpdate(const std::string& msg = "updated matrix is singular") : Error(msg) {}
};

struct Unsupported : Error {
  explicit Unsupported(const std::string& msg = "operation not supported for this family") : Error(msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg = "bad configuration") : Error(msg) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& msg = "parse error") : Error(msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg = "i/o error") : Error(msg) {}
};

}  // namespace rica
