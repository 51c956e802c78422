#ifndef SPLINELAB_BVP_HPP
#define SPLINELAB_BVP_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "splinelab/geometry.hpp"
#include "splinelab/ode.hpp"
#include "splinelab/pmp.hpp"
#include "splinelab/types.hpp"

namespace splinelab {

/// Two tangent vectors to connect, in the active geometry's coordinates,
/// plus the fixed horizon T for the cubic problem.
struct BoundaryData {
  Vector q0, v0, q1, v1;
  double T = 1.0;
};

/// Same data in ambient R^3 for the extrinsic sphere backend.
struct SphereBoundary {
  Vector3 q0, v0, q1, v1;
  double T = 1.0;
};

struct ShootOptions {
  double mismatch_tol = 1e-8;
  int max_iterations = 60;
  int multistart = 16;
  std::uint64_t rng_seed = 0x73706c696e65ULL;
  double fd_step = 1e-6;  // scaled central-difference step for the Jacobian
  int threads = 1;
};

/// One converged extremal from multistart. For the extrinsic sphere backend
/// p0/alpha0 are ambient tangent vectors at q0.
struct Extremal {
  Vector p0, alpha0;
  double T = 0.0;
  double cost = 0.0;
  double mismatch = 0.0;
  int start_index = -1;
};

struct ShootingResult {
  bool converged = false;
  Vector p0, alpha0;        // best start
  double T = 0.0;           // horizon (echoed, or solved for free-time)
  double mismatch = 0.0;    // terminal mismatch inf-norm of the best start
  int iterations = 0;
  int start_index = -1;
  double cost = 0.0;
  Trajectory trajectory;    // packed states of the backend that produced it
  std::vector<Extremal> extremals; // all distinct converged ones, cheapest first
  std::string failure;      // nonempty when converged == false
};

/// Terminal mismatch (x(T) - q1, v(T) - v1) of the split-system flow from
/// (q0, v0) with initial costates (p0, alpha0). Throws on integration
/// failure (the solver treats that as an invalid sample).
Vector shooting_residual(const ChartGeometry& geom, const CostModel& cost,
                         const BoundaryData& bd, const Vector& p0, const Vector& alpha0,
                         const IntegratorConfig& icfg);

/// Single shooting with damped least squares and multistart on the initial
/// costates. Fixed horizon bd.T.
ShootingResult shoot(const ChartGeometry& geom, const CostModel& cost, const BoundaryData& bd,
                     const ShootOptions& opts, const IntegratorConfig& icfg,
                     const std::optional<std::pair<Vector, Vector>>& guess = std::nullopt);

/// Cubic shooting on S^2(r) through the extrinsic system; mismatch is
/// measured in ambient coordinates and iterates live in the tangent planes
/// at the endpoints, which avoids chart seams. The returned trajectory is
/// the packed extrinsic state [x0; x1; x2; x3]. The optional guess supplies
/// ambient (p0, alpha0) for the first start.
ShootingResult shoot_sphere_extrinsic(double radius, double beta, const SphereBoundary& bd,
                                      const ShootOptions& opts, const IntegratorConfig& icfg,
                                      const std::optional<std::pair<Vector3, Vector3>>& guess =
                                          std::nullopt);

/// Free-time problem: unknowns (p0, alpha0, T), closed by H = 0 at t = 0
/// (the standard free-final-time multiplier condition). The bound is the
/// acceleration cap A; bd.T > 0 is used as the initial guess when given.
ShootingResult tmin_shoot(const ChartGeometry& geom, double bound, const BoundaryData& bd,
                          const ShootOptions& opts, const IntegratorConfig& icfg,
                          const std::optional<Vector>& guess = std::nullopt);

} // namespace splinelab

#endif
