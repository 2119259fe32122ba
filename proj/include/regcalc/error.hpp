#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace regcalc {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration (CLI exit 64).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A hypothesis required by an operation does not hold (CLI exit 65).
/// `hypothesis` names the violated condition, e.g. "support preserving".
class PreconditionError : public Error {
 public:
  PreconditionError(std::string hypothesis, const std::string& detail)
      : Error(hypothesis + ": " + detail), hypothesis_(std::move(hypothesis)) {}

  const std::string& hypothesis() const noexcept { return hypothesis_; }

 private:
  std::string hypothesis_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownIdentifierError : public SyntaxError {
 public:
  UnknownIdentifierError(const std::string& name, std::size_t offset)
      : SyntaxError("unknown identifier '" + name + "'", offset), name_(name) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// Domain violation while evaluating an expression (division by zero, log of a
/// nonpositive number, ...). Never reported as NaN.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class OrderBudgetError : public Error {
 public:
  using Error::Error;
};

/// An index operation (epsilon/delta) was applied to a pair outside its domain.
class UndefinedIndexError : public Error {
 public:
  using Error::Error;
};

class AtlasError : public Error {
 public:
  using Error::Error;
};

/// Error located at a point of some chart.
class LocatedError : public Error {
 public:
  LocatedError(const std::string& what, std::string chart, std::vector<double> point)
      : Error(what), chart_(std::move(chart)), point_(std::move(point)) {}

  const std::string& chart() const noexcept { return chart_; }
  const std::vector<double>& point() const noexcept { return point_; }

 private:
  std::string chart_;
  std::vector<double> point_;
};

class CoverageError : public LocatedError {
 public:
  using LocatedError::LocatedError;
};

class SingularJacobianError : public LocatedError {
 public:
  using LocatedError::LocatedError;
};

}  // namespace regcalc
