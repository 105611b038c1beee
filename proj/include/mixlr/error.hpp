#pragma once

#include <stdexcept>
#include <string>

namespace mixlr {

// Configuration problems: bad flags, malformed config files, invalid settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data problems: malformed CSV/JSON, unknown markers or fluids,
// datasets that cannot support the requested operation.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what)
      : DataError("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

// Numerical failures: non-convergence, degenerate fits.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double gradient_norm, int iterations)
      : NumericError(what + " (gradient norm " + std::to_string(gradient_norm) + " after " +
                     std::to_string(iterations) + " iterations)"),
        gradient_norm_(gradient_norm),
        iterations_(iterations) {}

  double gradient_norm() const noexcept { return gradient_norm_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double gradient_norm_;
  int iterations_;
};

}  // namespace mixlr
