#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace rpsim {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

inline constexpr Complex kI{0.0, 1.0};

// Tolerances used by the validity checks throughout.
inline constexpr double kHermTol = 1e-12;
inline constexpr double kPsdTol = -1e-10;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kZeroTraceTol = 1e-14;
inline constexpr double kIniconTol = 1e-10;

struct ZeroTraceError : std::runtime_error {
  explicit ZeroTraceError(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

struct ImpossibleRecordError : std::runtime_error {
  explicit ImpossibleRecordError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a numerical invariant (positivity, trace conservation, ...)
// is violated at runtime.  The CLI maps this to exit code 3.
struct InvariantViolationError : std::runtime_error {
  explicit InvariantViolationError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
  int line = 0;
  int col = 0;
  ParseError(const std::string& what, int line_, int col_)
      : std::runtime_error(what + " (line " + std::to_string(line_) + ", col " +
                           std::to_string(col_) + ")"),
        line(line_),
        col(col_) {}
};

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rpsim
