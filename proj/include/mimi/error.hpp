#pragma once

#include <stdexcept>
#include <string>

namespace mimi {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise malformed numeric input.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A quantity left its numerically safe range (overflow, vanishing curvature).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A cell in an input file could not be parsed. Coordinates are 0-based data
/// rows (header excluded) and columns.
class IngestionError : public Error {
 public:
  IngestionError(const std::string& what, long row, long col)
      : Error(what + " (row " + std::to_string(row) + ", column " +
              std::to_string(col) + ")"),
        row_(row),
        col_(col) {}

  long row() const noexcept { return row_; }
  long col() const noexcept { return col_; }

 private:
  long row_;
  long col_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

/// An iterative method ran out of iterations. `residual` is the last
/// convergence measure (KKT residual or relative change).
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace mimi
