#ifndef SPLINELAB_PMP_HPP
#define SPLINELAB_PMP_HPP

#include "splinelab/geometry.hpp"
#include "splinelab/ode.hpp"
#include "splinelab/types.hpp"

namespace splinelab {

/// Phase point of the spline control problem in split variables:
/// chart point x, velocity v, horizontal costate p, vertical costate alpha.
struct SplitState {
  Vector x, v, p, alpha;

  int dim() const { return static_cast<int>(x.size()); }
  static SplitState zero(int n);
};

/// Cost selector. Cubic minimizes the time integral of beta/2 |u|^2 over a
/// fixed horizon; time-minimal minimizes transfer time under |u| <= bound.
struct CostModel {
  enum class Kind { Cubic, TimeMinimal };
  Kind kind = Kind::Cubic;
  double beta = 1.0;
  double bound = 1.0;

  static CostModel cubic(double beta);
  static CostModel time_minimal(double bound);
  bool is_cubic() const { return kind == Kind::Cubic; }
};

/// Below this norm of alpha-sharp the time-minimal maximizer is treated as
/// singular and integration refuses to proceed.
inline constexpr double kSingularControlGuard = 1e-10;

/// The running cost c evaluated at s = g(u,u).
double cost_profile(const CostModel& cost, double s);

/// Legendre-Fenchel dual of the cost profile, evaluated at s = g^{-1}(a,a):
/// s/(2 beta) for cubic, -1 + bound*sqrt(s) for time-minimal.
double legendre_dual(const CostModel& cost, double s);

/// Maximizing control: alpha-sharp/beta (cubic) or the bound-norm rescaling
/// of alpha-sharp (time-minimal). Throws SingularControlError when the
/// time-minimal maximizer is not single-valued.
Vector optimal_control(const ChartGeometry& geom, const CostModel& cost, const SplitState& s);

/// H = <p, v> + Leg(c)(g^{-1}(alpha, alpha)). Defined for all states.
double optimal_hamiltonian(const ChartGeometry& geom, const CostModel& cost, const SplitState& s);

/// The Hamiltonian vector field of the optimal Hamiltonian in split
/// variables:
///   dx^i     = v^i
///   dv^a     = u*^a - Gamma^a_{ib} v^i v^b
///   dp_i     = alpha_b R^b_{ijk} v^j v^k + Gamma^b_{ia} v^a p_b
///   dalpha_a = -p_a + Gamma^b_{ia} v^i alpha_b
SplitState split_field(const ChartGeometry& geom, const CostModel& cost, const SplitState& s);

/// Canonical coordinates on the cotangent bundle of TQ relative to the
/// chart: same (x, v), conjugate momenta (p_tilde, alpha_tilde).
struct CanonicalState {
  Vector x, v, p_tilde, alpha_tilde;
};

/// p_tilde_i = p_i + Gamma^k_{ij} v^j alpha_k; alpha_tilde = alpha.
CanonicalState split_to_canonical(const ChartGeometry& geom, const SplitState& s);
SplitState canonical_to_split(const ChartGeometry& geom, const CanonicalState& c);

/// Tangent variation of a split state.
struct SplitTangent {
  Vector dx, dv, dp, dalpha;
  static SplitTangent zero(int n);
};

/// The split-variable symplectic form: canonical part, connection-twisted
/// (v, alpha) pairing, and the curvature two-form term. Testing aid; the
/// integrator never calls this.
double symplectic_form_split(const ChartGeometry& geom, const SplitState& s,
                             const SplitTangent& X, const SplitTangent& Y);

/// Flattening [x; v; p; alpha] used by the ODE layer.
Vector pack_split(const SplitState& s);
SplitState unpack_split(const Vector& y, int dim);

/// ODE right-hand side for the split system. The geometry and cost must
/// outlive the returned callable.
OdeField split_ode_field(const ChartGeometry& geom, const CostModel& cost);

} // namespace splinelab

#endif
