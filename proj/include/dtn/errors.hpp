#ifndef DTN_ERRORS_HPP
#define DTN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dtn {

/// Base class for numerical failures (mapped to exit code 3 by the CLI).
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Root finder or iteration failed to converge.
class ConvergenceError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Evaluation point lies inside the exclusion radius of a pole.
class PoleError : public NumericalError {
public:
  PoleError(const std::string &what, double pole)
      : NumericalError(what), pole_(pole) {}
  double pole() const noexcept { return pole_; }

private:
  double pole_;
};

/// Series tail bound not met within the hard cap.
class TruncationError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Quadrature grid too coarse for the requested boundary mode.
class ResolutionError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Finite model violates the direct-sum condition (0 in the Dirichlet spectrum).
class DecompositionError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Reading or writing an artifact failed (exit code 1 in the CLI).
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace dtn

#endif // DTN_ERRORS_HPP
