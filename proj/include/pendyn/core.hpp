#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>

namespace pendyn {

/// Points of the state space H = R^n.
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNonFinite,
  kSingularSystem,
  kInfeasible,
  kUnsupported,
  kPairing,
  kInsufficientSamples,
  kStepUnderflow,
  kOracleFailure,
  kParse,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A value of R ∪ {+∞}. Support functions and conjugates use this instead of
/// a sentinel double.
class ExtendedReal {
 public:
  static ExtendedReal finite(double v);
  static ExtendedReal infinity() { return ExtendedReal(true, 0.0); }

  bool is_finite() const noexcept { return !infinite_; }
  bool is_infinite() const noexcept { return infinite_; }

  /// Throws kInvalidArgument when +∞.
  double value() const;
  /// +∞ maps to std::numeric_limits<double>::infinity().
  double to_double() const noexcept {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }

  friend bool operator==(const ExtendedReal&, const ExtendedReal&) = default;

 private:
  ExtendedReal(bool inf, double v) : infinite_(inf), value_(v) {}

  bool infinite_;
  double value_;
};

std::string to_string(const ExtendedReal& v);

void require_dim(const Vec& x, Index n, const char* what);
void require_finite(const Vec& x, const char* what);
void require_positive(double v, const char* what);

}  // namespace pendyn
