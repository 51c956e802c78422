#ifndef SPLINELAB_TYPES_HPP
#define SPLINELAB_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace splinelab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Matrix4 = Eigen::Matrix4d;

inline constexpr const char* kVersion = "0.1.0";

/// Base class for all recoverable numerical/domain failures.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Chart point outside the geometry's domain.
class DomainError : public Error {
public:
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

/// Malformed or inconsistent user input (manifest, state, parameters).
class InputError : public Error {
public:
  explicit InputError(const std::string& msg) : Error(msg) {}
};

/// Time-minimal control is not single-valued: |alpha_sharp| below the guard.
class SingularControlError : public Error {
public:
  explicit SingularControlError(const std::string& msg) : Error(msg) {}
};

/// Reduced sphere dynamics evaluated at (or below) the v -> 0 singularity.
class VelocitySingularityError : public Error {
public:
  explicit VelocitySingularityError(const std::string& msg) : Error(msg) {}
};

/// Constraint drift on the extrinsic sphere system exceeded its bound.
class ConstraintDriftError : public Error {
public:
  explicit ConstraintDriftError(const std::string& msg) : Error(msg) {}
};

/// Iterative refinement failed to converge.
class ConvergenceError : public Error {
public:
  explicit ConvergenceError(const std::string& msg) : Error(msg) {}
};

} // namespace splinelab

#endif
