#ifndef SPLINELAB_SPHERE_HPP
#define SPLINELAB_SPHERE_HPP

#include <array>
#include <complex>
#include <utility>
#include <vector>

#include "splinelab/ode.hpp"
#include "splinelab/types.hpp"

namespace splinelab {

// ---------------------------------------------------------------------------
// Extrinsic cubic-spline system on S^n (Crouch-Leite form)
// ---------------------------------------------------------------------------

/// Ambient phase point (x0, x1, x2, x3) = (position, velocity, alpha, -p).
/// All four vectors live in R^{n+1}; x1, x2, x3 are tangent at x0.
struct ExtrinsicSphereState {
  Vector x0, x1, x2, x3;
  double radius = 1.0;

  int ambient_dim() const { return static_cast<int>(x0.size()); }
  /// Max violation of |x0| = r and the three tangency constraints.
  double constraint_violation() const;
};

/// Tangency tolerance on inputs; fields reject states drifting past 1e-4.
inline constexpr double kExtrinsicInputTol = 1e-6;
inline constexpr double kExtrinsicDriftTol = 1e-4;

/// Time derivative of the extrinsic state. The equations are the radius-1
/// system
///   dx0 = x1,                 dx1 = x2/beta - |x1|^2 x0,
///   dx2 = x3 - (x2.x1) x0,    dx3 = -(x3.x1) x0 + (x2.x1) x1 - |x1|^2 x2;
/// for radius r != 1 the state is rescaled to radius 1, the field evaluated
/// there, and the derivative mapped back (x -> x/r, t -> t/r).
ExtrinsicSphereState crouch_leite_field(const ExtrinsicSphereState& s, double beta);

/// Flattened layout [x0; x1; x2; x3] for the ODE layer.
Vector pack_extrinsic(const ExtrinsicSphereState& s);
ExtrinsicSphereState unpack_extrinsic(const Vector& y, double radius);
OdeField crouch_leite_ode_field(double beta, double radius);

/// Split variables from ambient costates (Prop.-style projection):
/// alpha = alpha_tilde - <alpha_tilde,x> x / r^2,
/// p     = p_tilde_parallel - (<alpha_tilde,x>/r^2) v.
struct SphereSplitPair {
  Vector p, alpha;
};
SphereSplitPair extrinsic_split_vars(const Vector& x, const Vector& v,
                                     const Vector& p_tilde, const Vector& alpha_tilde,
                                     double r);

// ---------------------------------------------------------------------------
// SO(3)-reduced system on S^2
// ---------------------------------------------------------------------------

/// Reduced phase point (v, a, M) with scalar speed v, its conjugate a, and
/// the body momentum M. |M| is the Casimir.
struct ReducedState {
  double v = 0.0;
  double a = 0.0;
  Vector3 M = Vector3::Zero();

  double casimir() const { return M.norm(); }
};

struct ReducedParams {
  double beta = 1.0;
  double r = 1.0;
};

/// Relative velocity floor: fields throw VelocitySingularityError at
/// |v| <= kVelocityFloor * r.
inline constexpr double kVelocityFloor = 1e-6;

/// H* = (a^2 + (M3/v)^2) / (2 beta) + M2 v / r.
double reduced_hamiltonian(const ReducedState& s, const ReducedParams& prm);

/// dv = a/beta, da = -M2/r + M3^2/(beta v^3), dM = M x (0, v/r, M3/(beta v^2)).
ReducedState reduced_field_cartesian(const ReducedState& s, const ReducedParams& prm);

Vector pack_reduced(const ReducedState& s);
ReducedState unpack_reduced(const Vector& y);
OdeField reduced_ode_field(const ReducedParams& prm);

/// Time-minimal counterpart: H = -1 + bound sqrt(a^2 + (M3/v)^2) + M2 v / r.
/// The optimal controls satisfy u1^2 + u2^2 = bound^2 away from the singular
/// set a = M3 = 0, where evaluation throws SingularControlError. Shipped as
/// a field only; no equilibrium or section analysis is built on it.
double reduced_hamiltonian_time_minimal(const ReducedState& s, const ReducedParams& prm,
                                        double bound);
ReducedState reduced_field_time_minimal(const ReducedState& s, const ReducedParams& prm,
                                        double bound);
OdeField reduced_time_minimal_ode_field(const ReducedParams& prm, double bound);

/// Momentum-sphere coordinates: M = mu (cos(phi) cos(theta), sin(phi),
/// cos(phi) sin(theta)) with z = sin(phi); here (theta, z) are used directly.
struct SphericalParams {
  double beta = 1.0;
  double r = 1.0;
  double mu = 1.0;
};

/// State layout (v, a, theta, z).
using SphericalState = Eigen::Vector4d;

double reduced_hamiltonian_spherical(const SphericalState& s, const SphericalParams& prm);
SphericalState reduced_field_spherical(const SphericalState& s, const SphericalParams& prm);
OdeField reduced_spherical_ode_field(const SphericalParams& prm);

/// (mu, theta, z) -> M. Requires mu > 0, |z| <= 1.
Vector3 momentum_from_angles(double mu, double theta, double z);
/// M -> (mu, theta, z). Throws InputError at the poles M1 = M3 = 0 where
/// theta is undefined.
void momentum_to_angles(const Vector3& M, double& mu, double& theta, double& z);

/// Conversions between the two reduced parameterizations.
SphericalState reduced_to_spherical(const ReducedState& s);
ReducedState spherical_to_reduced(const SphericalState& s, double mu);

// ---------------------------------------------------------------------------
// Gauss-frame reconstruction
// ---------------------------------------------------------------------------

/// Skew state matrix of the sphere: rows/columns ordered (e1, e2, e3),
///   X = [[0, -u2/v, v/r], [u2/v, 0, 0], [-v/r, 0, 0]].
Matrix3 darboux_state_matrix(double v, double u2, double r);

/// General convex-surface form as documented in the Darboux-frame state
/// equations, with normal curvature B(e1,e1) and geodesic torsion tau_g.
/// On the sphere with outer normal, B(e1,e1) = -1/r and tau_g = 0, which
/// reproduces darboux_state_matrix.
Matrix3 darboux_state_matrix_general(double v, double u2, double normal_curvature,
                                     double geodesic_torsion);

/// Body angular velocity vector of the frame motion: (0, v/r, u2/v).
Vector3 body_angular_velocity(double v, double u2, double r);

/// dR = R X(v, u2).
Matrix3 reconstruction_field(const Matrix3& R, double v, double u2, double r);

/// ||R^T R - I||_inf.
double orthogonality_drift(const Matrix3& R);
/// Nearest rotation by polar decomposition.
Matrix3 reproject_rotation(const Matrix3& R);

/// Combined 13-variable system [R (9, columns e1,e2,e3); v; a; theta; phi]
/// with the optimal control u2* = M3/(beta v), M3 = mu cos(phi) sin(theta).
struct ReconstructionParams {
  double beta = 1.0;
  double r = 1.0;
  double mu = 1.0;
};
Vector pack_reconstruction(const Matrix3& R, double v, double a, double theta, double phi);
OdeField reconstruction_ode_field(const ReconstructionParams& prm);

struct ReconstructedTrajectory {
  std::vector<double> t;
  std::vector<Vector3> gamma;   // r * (third frame column)
  std::vector<Matrix3> frames;
  std::vector<double> v, a, theta, phi;
  double max_orthogonality_drift = 0.0;
  int reprojections = 0;
  IntegrateStatus status = IntegrateStatus::Done;
  std::string message;

  bool ok() const { return integrate_succeeded(status); }
};

struct ReconstructOptions {
  IntegratorConfig integrator{};
  int samples = 200;           // uniform output grid over [t0, t1]
  bool reproject = false;      // opt-in polar reprojection past 1e-8 drift
  double reproject_threshold = 1e-8;
};

/// Integrate reduced variables and frame together from t0 = 0 and read off
/// the curve gamma(t) = r * (third column of R).
ReconstructedTrajectory reconstruct_trajectory(const ReconstructionParams& prm,
                                               const Matrix3& R0, double v0, double a0,
                                               double theta0, double phi0, double t1,
                                               const ReconstructOptions& opts);

// ---------------------------------------------------------------------------
// Poisson projection (radius-1, cost-independent) and its lift
// ---------------------------------------------------------------------------

/// (x, v, p, alpha) -> (v, a, M):
///   a = alpha.v/|v|, v = |v|, M1 = det(p, v/|v|, x), M2 = p.v/|v|,
///   M3 = det(alpha, x, v).
ReducedState poisson_project(const Vector3& x, const Vector3& v, const Vector3& p,
                             const Vector3& alpha);
ReducedState poisson_project(const ExtrinsicSphereState& s);

/// Inverse on the frame R = I: x0 = e3, x1 = v e1, alpha = a e1 + (M3/v) e2,
/// p = M2 e1 - M1 e2 (and x3 = -p). Any other lift differs by a rotation.
ExtrinsicSphereState poisson_lift(const ReducedState& s);

// ---------------------------------------------------------------------------
// Equilibria, linearization, symmetries, equators
// ---------------------------------------------------------------------------

/// The two relative equilibria for given v:
/// a = 0, M1 = 0, M2 = beta v^3 / r, M3 = +-beta v^3 / r.
std::array<ReducedState, 2> fixed_points(double v, double beta, double r);

/// Energy at the equilibrium: (3/2) beta v^4 / r^2.
double equilibrium_energy(double v, double beta, double r);

/// Closed-form loxodromic quadruple
/// (v/r) sqrt(2) 3^{1/4} (+-sqrt(1/2 - sqrt(3)/6) +- i sqrt(1/2 + sqrt(3)/6)).
std::array<std::complex<double>, 4> loxodromic_eigenvalues(double v, double r);

struct Linearization {
  std::array<std::complex<double>, 4> closed_form;
  Matrix4 jacobian;                  // central differences of the (v,a,theta,z) field
  std::array<double, 5> char_poly;   // monic: [1, c3, c2, c1, c0]
  std::array<std::complex<double>, 4> jacobian_eigenvalues;
};

/// Numeric linearization at the branch = +-1 equilibrium; mu is fixed by
/// the equilibrium condition mu = sqrt(2) beta v^3 / r.
Linearization linearize_fixed_point(double v, double r, double beta = 1.0, int branch = +1);

enum class SymmetryKind { Reflection, VelocityReversal, TimeReversal };

/// Maps a sampled reduced trajectory (packed (v,a,M1,M2,M3) with stored
/// derivatives) to its image under one of the discrete symmetries. The
/// output samples again satisfy the reduced equations.
Trajectory apply_symmetry(const Trajectory& traj, SymmetryKind kind);

struct EquatorPoint {
  double v, a;
  double angle;     // polar angle from the starting pole, d(angle)/dt = v/r
  Vector3 gamma;    // reconstructed curve for R0 = I
};

/// Closed-form equator family (M = (0, mu, 0)): a linear, v quadratic, the
/// reconstructed polar angle cubic in t. Throws VelocitySingularityError
/// when v vanishes inside [0, t].
EquatorPoint analytic_equator(double t, double mu, double r, double beta, double a0, double v0);

// ---------------------------------------------------------------------------
// Regularized reduced integration through v = 0 (radius 1)
// ---------------------------------------------------------------------------

struct RegularizationOptions {
  IntegratorConfig integrator{};
  double v_switch = 1e-2;   // hand over to the extrinsic system below this speed
  double v_resume = 2e-2;   // project back once the speed recovers past this
  double max_lift_span = 10.0;
};

struct RegularizedTrajectory {
  Trajectory reduced;                                  // (v,a,M1,M2,M3) samples
  std::vector<std::pair<double, double>> lifted_spans; // time spans spent in the extrinsic chart
  bool ok = false;
  std::string message;
};

/// Integrate the reduced system, crossing v = 0 by lifting to the extrinsic
/// Crouch-Leite system and projecting back. Radius must be 1.
RegularizedTrajectory integrate_reduced_regularized(const ReducedState& init, double beta,
                                                    double t0, double t1,
                                                    const RegularizationOptions& opts);

} // namespace splinelab

#endif
