#include "splinelab/sphere.hpp"

#include <cmath>
#include <sstream>

namespace splinelab {

// ---------------------------------------------------------------------------
// Extrinsic system
// ---------------------------------------------------------------------------

double ExtrinsicSphereState::constraint_violation() const {
  double worst = std::abs(x0.norm() - radius);
  worst = std::max(worst, std::abs(x0.dot(x1)));
  worst = std::max(worst, std::abs(x0.dot(x2)));
  worst = std::max(worst, std::abs(x0.dot(x3)));
  return worst;
}

namespace {

// Radius-1 equations; beta enters only through the control x2/beta.
void cl_unit_field(const Vector& y0, const Vector& y1, const Vector& y2, const Vector& y3,
                   double beta, Vector& d0, Vector& d1, Vector& d2, Vector& d3) {
  const double speed2 = y1.squaredNorm();
  const double a21 = y2.dot(y1);
  const double a31 = y3.dot(y1);
  d0 = y1;
  d1 = y2 / beta - speed2 * y0;
  d2 = y3 - a21 * y0;
  d3 = -a31 * y0 + a21 * y1 - speed2 * y2;
}

} // namespace

namespace {

ExtrinsicSphereState cl_field_unchecked(const ExtrinsicSphereState& s, double beta) {
  ExtrinsicSphereState d;
  d.radius = s.radius;
  if (s.radius == 1.0) {
    cl_unit_field(s.x0, s.x1, s.x2, s.x3, beta, d.x0, d.x1, d.x2, d.x3);
    return d;
  }
  // Rescale to radius 1 (x -> x/r, t -> t/r), evaluate, map the derivative
  // back through the dictionary (x0, x1, x2, x3) = (r y0, y1, y2/r, y3/r^2).
  const double r = s.radius;
  Vector f0, f1, f2, f3;
  cl_unit_field(s.x0 / r, s.x1, r * s.x2, (r * r) * s.x3, beta, f0, f1, f2, f3);
  d.x0 = f0;
  d.x1 = f1 / r;
  d.x2 = f2 / (r * r);
  d.x3 = f3 / (r * r * r);
  return d;
}

} // namespace

ExtrinsicSphereState crouch_leite_field(const ExtrinsicSphereState& s, double beta) {
  if (!(beta > 0.0)) throw InputError("crouch_leite_field: beta must be positive");
  const double viol = s.constraint_violation();
  if (viol > kExtrinsicDriftTol) {
    std::ostringstream os;
    os << "extrinsic constraint drift " << viol << " beyond " << kExtrinsicDriftTol;
    throw ConstraintDriftError(os.str());
  }
  return cl_field_unchecked(s, beta);
}

Vector pack_extrinsic(const ExtrinsicSphereState& s) {
  const int m = s.ambient_dim();
  Vector y(4 * m);
  y << s.x0, s.x1, s.x2, s.x3;
  return y;
}

ExtrinsicSphereState unpack_extrinsic(const Vector& y, double radius) {
  if (y.size() % 4 != 0) throw InputError("unpack_extrinsic: bad state size");
  const int m = static_cast<int>(y.size()) / 4;
  ExtrinsicSphereState s;
  s.x0 = y.segment(0, m);
  s.x1 = y.segment(m, m);
  s.x2 = y.segment(2 * m, m);
  s.x3 = y.segment(3 * m, m);
  s.radius = radius;
  return s;
}

OdeField crouch_leite_ode_field(double beta, double radius) {
  // Runge-Kutta stage states sit O(h^2) off the constraint manifold, so the
  // integration path skips the drift guard; callers monitor accepted samples.
  if (!(beta > 0.0)) throw InputError("crouch_leite_ode_field: beta must be positive");
  return [beta, radius](double, const Vector& y, Vector& dy) {
    dy = pack_extrinsic(cl_field_unchecked(unpack_extrinsic(y, radius), beta));
  };
}

SphereSplitPair extrinsic_split_vars(const Vector& x, const Vector& v,
                                     const Vector& p_tilde, const Vector& alpha_tilde,
                                     double r) {
  if (std::abs(x.norm() - r) > 1e-8)
    throw InputError("extrinsic_split_vars: |x| != r");
  const double r2 = r * r;
  const double ax = alpha_tilde.dot(x);
  SphereSplitPair out;
  out.alpha = alpha_tilde - (ax / r2) * x;
  out.p = p_tilde - (p_tilde.dot(x) / r2) * x - (ax / r2) * v;
  return out;
}

// ---------------------------------------------------------------------------
// Reduced system
// ---------------------------------------------------------------------------

namespace {

void require_speed(double v, double r, const char* who) {
  if (std::abs(v) <= kVelocityFloor * r) {
    std::ostringstream os;
    os << who << ": |v| <= " << kVelocityFloor * r << " (v = " << v << ")";
    throw VelocitySingularityError(os.str());
  }
}

} // namespace

double reduced_hamiltonian(const ReducedState& s, const ReducedParams& prm) {
  require_speed(s.v, prm.r, "reduced_hamiltonian");
  const double m3v = s.M[2] / s.v;
  return (s.a * s.a + m3v * m3v) / (2.0 * prm.beta) + s.M[1] * s.v / prm.r;
}

ReducedState reduced_field_cartesian(const ReducedState& s, const ReducedParams& prm) {
  require_speed(s.v, prm.r, "reduced_field_cartesian");
  const double beta = prm.beta, r = prm.r;
  const double v2 = s.v * s.v;
  ReducedState d;
  d.v = s.a / beta;
  d.a = -s.M[1] / r + s.M[2] * s.M[2] / (beta * v2 * s.v);
  const Vector3 omega(0.0, s.v / r, s.M[2] / (beta * v2));
  d.M = s.M.cross(omega);
  return d;
}

Vector pack_reduced(const ReducedState& s) {
  Vector y(5);
  y << s.v, s.a, s.M[0], s.M[1], s.M[2];
  return y;
}

ReducedState unpack_reduced(const Vector& y) {
  if (y.size() != 5) throw InputError("unpack_reduced: bad state size");
  return {y[0], y[1], Vector3(y[2], y[3], y[4])};
}

OdeField reduced_ode_field(const ReducedParams& prm) {
  return [prm](double, const Vector& y, Vector& dy) {
    dy = pack_reduced(reduced_field_cartesian(unpack_reduced(y), prm));
  };
}

namespace {

// |(u1, u2)| of the time-minimal problem before rescaling to the bound.
double tmin_control_norm(const ReducedState& s) {
  return std::hypot(s.a, s.M[2] / s.v);
}

} // namespace

double reduced_hamiltonian_time_minimal(const ReducedState& s, const ReducedParams& prm,
                                        double bound) {
  require_speed(s.v, prm.r, "reduced_hamiltonian_time_minimal");
  return -1.0 + bound * tmin_control_norm(s) + s.M[1] * s.v / prm.r;
}

ReducedState reduced_field_time_minimal(const ReducedState& s, const ReducedParams& prm,
                                        double bound) {
  require_speed(s.v, prm.r, "reduced_field_time_minimal");
  if (!(bound > 0.0)) throw InputError("reduced_field_time_minimal: bound must be positive");
  const double norm = tmin_control_norm(s);
  if (norm < 1e-10)
    throw SingularControlError("time-minimal reduced control singular: a = M3/v = 0");
  const double r = prm.r;
  const double m3v = s.M[2] / s.v;
  ReducedState d;
  d.v = bound * s.a / norm;                                   // u1*
  d.a = bound * m3v * m3v / (norm * s.v) - s.M[1] / r;
  const Vector3 omega(0.0, s.v / r, bound * s.M[2] / (norm * s.v * s.v));
  d.M = s.M.cross(omega);
  return d;
}

OdeField reduced_time_minimal_ode_field(const ReducedParams& prm, double bound) {
  return [prm, bound](double, const Vector& y, Vector& dy) {
    dy = pack_reduced(reduced_field_time_minimal(unpack_reduced(y), prm, bound));
  };
}

double reduced_hamiltonian_spherical(const SphericalState& s, const SphericalParams& prm) {
  const double v = s[0], a = s[1], theta = s[2], z = s[3];
  require_speed(v, prm.r, "reduced_hamiltonian_spherical");
  const double st = std::sin(theta);
  return a * a / (2.0 * prm.beta) +
         prm.mu * prm.mu * (1.0 - z * z) * st * st / (2.0 * prm.beta * v * v) +
         prm.mu * z * v / prm.r;
}

SphericalState reduced_field_spherical(const SphericalState& s, const SphericalParams& prm) {
  const double v = s[0], a = s[1], theta = s[2], z = s[3];
  require_speed(v, prm.r, "reduced_field_spherical");
  if (std::abs(z) > 1.0 + 1e-9)
    throw InputError("reduced_field_spherical: |z| > 1");
  const double beta = prm.beta, r = prm.r, mu = prm.mu;
  const double st = std::sin(theta), ct = std::cos(theta);
  const double v2 = v * v;
  SphericalState d;
  d[0] = a / beta;
  d[1] = mu * (-z / r + (mu / beta) * (1.0 - z * z) * st * st / (v2 * v));
  d[2] = v / r - (mu / beta) * z * st * st / v2;
  d[3] = (mu / beta) * st * ct * (z - 1.0) * (z + 1.0) / v2;
  return d;
}

OdeField reduced_spherical_ode_field(const SphericalParams& prm) {
  return [prm](double, const Vector& y, Vector& dy) {
    const SphericalState d = reduced_field_spherical(SphericalState(y[0], y[1], y[2], y[3]), prm);
    dy.resize(4);
    dy << d[0], d[1], d[2], d[3];
  };
}

Vector3 momentum_from_angles(double mu, double theta, double z) {
  if (!(mu > 0.0)) throw InputError("momentum_from_angles: mu must be positive");
  if (std::abs(z) > 1.0) throw InputError("momentum_from_angles: |z| > 1");
  const double cphi = std::sqrt(std::max(0.0, 1.0 - z * z));
  return mu * Vector3(cphi * std::cos(theta), z, cphi * std::sin(theta));
}

void momentum_to_angles(const Vector3& M, double& mu, double& theta, double& z) {
  mu = M.norm();
  if (!(mu > 0.0)) throw InputError("momentum_to_angles: |M| = 0");
  z = M[1] / mu;
  if (std::hypot(M[0], M[2]) == 0.0)
    throw InputError("momentum_to_angles: theta undefined at M1 = M3 = 0");
  theta = std::atan2(M[2], M[0]);
}

SphericalState reduced_to_spherical(const ReducedState& s) {
  double mu, theta, z;
  momentum_to_angles(s.M, mu, theta, z);
  return SphericalState(s.v, s.a, theta, z);
}

ReducedState spherical_to_reduced(const SphericalState& s, double mu) {
  return {s[0], s[1], momentum_from_angles(mu, s[2], s[3])};
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

Matrix3 darboux_state_matrix(double v, double u2, double r) {
  // Umbilic surface: tau_g = (kappa_1 - kappa_2) sin cos = 0, and with the
  // outer normal B(e1,e1) = -1/r.
  return darboux_state_matrix_general(v, u2, -1.0 / r, 0.0);
}

Matrix3 darboux_state_matrix_general(double v, double u2, double normal_curvature,
                                     double geodesic_torsion) {
  require_speed(v, 1.0, "darboux_state_matrix");
  Matrix3 X;
  X << 0.0, -u2 / v, -v * normal_curvature,
       u2 / v, 0.0, -v * geodesic_torsion,
       v * normal_curvature, v * geodesic_torsion, 0.0;
  return X;
}

Vector3 body_angular_velocity(double v, double u2, double r) {
  require_speed(v, r, "body_angular_velocity");
  return Vector3(0.0, v / r, u2 / v);
}

Matrix3 reconstruction_field(const Matrix3& R, double v, double u2, double r) {
  return R * darboux_state_matrix(v, u2, r);
}

double orthogonality_drift(const Matrix3& R) {
  return (R.transpose() * R - Matrix3::Identity()).cwiseAbs().maxCoeff();
}

Matrix3 reproject_rotation(const Matrix3& R) {
  Eigen::JacobiSVD<Matrix3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 out = svd.matrixU() * svd.matrixV().transpose();
  if (out.determinant() < 0.0) {
    Matrix3 U = svd.matrixU();
    U.col(2) *= -1.0;
    out = U * svd.matrixV().transpose();
  }
  return out;
}

Vector pack_reconstruction(const Matrix3& R, double v, double a, double theta, double phi) {
  Vector y(13);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 3; ++i) y[3 * c + i] = R(i, c);
  y[9] = v;
  y[10] = a;
  y[11] = theta;
  y[12] = phi;
  return y;
}

OdeField reconstruction_ode_field(const ReconstructionParams& prm) {
  return [prm](double, const Vector& y, Vector& dy) {
    const double v = y[9], theta = y[11], phi = y[12];
    require_speed(v, prm.r, "reconstruction field");
    const double beta = prm.beta, r = prm.r, mu = prm.mu;
    const double st = std::sin(theta), ct = std::cos(theta);
    const double sphi = std::sin(phi), cphi = std::cos(phi);
    const double m3 = mu * cphi * st;       // M3 = mu cos(phi) sin(theta)
    const double u2v = m3 / (beta * v * v); // u2*/v with u2* = M3/(beta v)
    const double vr = v / r;

    dy.resize(13);
    const auto e1 = y.segment<3>(0), e2 = y.segment<3>(3), e3 = y.segment<3>(6);
    dy.segment<3>(0) = u2v * e2 - vr * e3; // de1
    dy.segment<3>(3) = -u2v * e1;          // de2
    dy.segment<3>(6) = vr * e1;            // de3
    dy[9] = y[10] / beta;
    dy[10] = -mu * sphi / r + mu * mu * cphi * cphi * st * st / (beta * v * v * v);
    dy[11] = vr - mu * sphi * st * st / (beta * v * v);
    dy[12] = -mu * cphi * st * ct / (beta * v * v);
  };
}

namespace {

Matrix3 frame_from_packed(const Vector& y) {
  Matrix3 R;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 3; ++i) R(i, c) = y[3 * c + i];
  return R;
}

} // namespace

ReconstructedTrajectory reconstruct_trajectory(const ReconstructionParams& prm,
                                               const Matrix3& R0, double v0, double a0,
                                               double theta0, double phi0, double t1,
                                               const ReconstructOptions& opts) {
  ReconstructedTrajectory out;
  if (opts.samples < 1) throw InputError("reconstruct_trajectory: need samples >= 1");
  const OdeField field = reconstruction_ode_field(prm);

  std::vector<double> grid(opts.samples);
  for (int i = 0; i < opts.samples; ++i) grid[i] = t1 * (i + 1) / opts.samples;

  auto emit = [&](double t, const Vector& y) {
    Matrix3 R = frame_from_packed(y);
    const double drift = orthogonality_drift(R);
    out.max_orthogonality_drift = std::max(out.max_orthogonality_drift, drift);
    out.t.push_back(t);
    out.frames.push_back(R);
    out.gamma.push_back(prm.r * R.col(2));
    out.v.push_back(y[9]);
    out.a.push_back(y[10]);
    out.theta.push_back(y[11]);
    out.phi.push_back(y[12]);
  };

  Vector y = pack_reconstruction(R0, v0, a0, theta0, phi0);
  emit(0.0, y);
  double t = 0.0;
  for (double target : grid) {
    Trajectory piece = integrate(field, y, t, target, opts.integrator);
    if (!piece.ok()) {
      out.status = piece.status;
      out.message = piece.message;
      return out;
    }
    t = piece.t.back();
    y = piece.y.back();
    if (opts.reproject) {
      Matrix3 R = frame_from_packed(y);
      if (orthogonality_drift(R) > opts.reproject_threshold) {
        R = reproject_rotation(R);
        for (int c = 0; c < 3; ++c)
          for (int i = 0; i < 3; ++i) y[3 * c + i] = R(i, c);
        ++out.reprojections;
      }
    }
    emit(t, y);
  }
  out.status = IntegrateStatus::Done;
  return out;
}

// ---------------------------------------------------------------------------
// Poisson projection and lift
// ---------------------------------------------------------------------------

ReducedState poisson_project(const Vector3& x, const Vector3& v, const Vector3& p,
                             const Vector3& alpha) {
  if (std::abs(x.norm() - 1.0) > 1e-8)
    throw InputError("poisson_project: |x| != 1 (the projection is radius-1)");
  const double speed = v.norm();
  require_speed(speed, 1.0, "poisson_project");
  const Vector3 vhat = v / speed;
  ReducedState s;
  s.v = speed;
  s.a = alpha.dot(vhat);
  s.M[0] = p.dot(vhat.cross(x));      // det(p, v/|v|, x)
  s.M[1] = p.dot(vhat);
  s.M[2] = alpha.dot(x.cross(v));     // det(alpha, x, v)
  return s;
}

ReducedState poisson_project(const ExtrinsicSphereState& s) {
  if (s.ambient_dim() != 3) throw InputError("poisson_project: ambient dimension must be 3");
  return poisson_project(Vector3(s.x0), Vector3(s.x1), Vector3(-s.x3), Vector3(s.x2));
}

ExtrinsicSphereState poisson_lift(const ReducedState& s) {
  require_speed(s.v, 1.0, "poisson_lift");
  ExtrinsicSphereState e;
  e.radius = 1.0;
  e.x0 = Vector3::UnitZ();
  e.x1 = s.v * Vector3::UnitX();
  e.x2 = s.a * Vector3::UnitX() + (s.M[2] / s.v) * Vector3::UnitY(); // alpha
  e.x3 = -(s.M[1] * Vector3::UnitX() - s.M[0] * Vector3::UnitY());  // -p
  return e;
}

// ---------------------------------------------------------------------------
// Equilibria and linearization
// ---------------------------------------------------------------------------

std::array<ReducedState, 2> fixed_points(double v, double beta, double r) {
  if (!(v > 0.0)) throw InputError("fixed_points: v must be positive");
  const double m = beta * v * v * v / r;
  ReducedState plus{v, 0.0, Vector3(0.0, m, m)};
  ReducedState minus{v, 0.0, Vector3(0.0, m, -m)};
  return {plus, minus};
}

double equilibrium_energy(double v, double beta, double r) {
  return 1.5 * beta * v * v * v * v / (r * r);
}

std::array<std::complex<double>, 4> loxodromic_eigenvalues(double v, double r) {
  const double scale = (v / r) * std::sqrt(2.0) * std::pow(3.0, 0.25);
  const double re = scale * std::sqrt(0.5 - std::sqrt(3.0) / 6.0);
  const double im = scale * std::sqrt(0.5 + std::sqrt(3.0) / 6.0);
  using C = std::complex<double>;
  return {C(re, im), C(re, -im), C(-re, im), C(-re, -im)};
}

Linearization linearize_fixed_point(double v, double r, double beta, int branch) {
  if (!(v > 0.0)) throw InputError("linearize_fixed_point: v must be positive");
  if (branch != 1 && branch != -1) throw InputError("linearize_fixed_point: branch is +-1");

  Linearization lin;
  lin.closed_form = loxodromic_eigenvalues(v, r);

  // Both equilibria have z = sqrt(2)/2; the M3 sign lives in theta.
  const double mu = std::sqrt(2.0) * beta * v * v * v / r;
  SphericalParams prm{beta, r, mu};
  SphericalState s0(v, 0.0, branch > 0 ? M_PI / 2.0 : 3.0 * M_PI / 2.0, std::sqrt(0.5));

  for (int j = 0; j < 4; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(s0[j]));
    SphericalState sp = s0, sm = s0;
    sp[j] += h;
    sm[j] -= h;
    const SphericalState fp = reduced_field_spherical(sp, prm);
    const SphericalState fm = reduced_field_spherical(sm, prm);
    lin.jacobian.col(j) = (fp - fm) / (2.0 * h);
  }

  // Faddeev-LeVerrier for the monic characteristic polynomial.
  const Matrix4 A = lin.jacobian;
  Matrix4 Mk = A;
  double c = -Mk.trace();
  lin.char_poly = {1.0, c, 0.0, 0.0, 0.0};
  for (int k = 2; k <= 4; ++k) {
    Mk = A * (Mk + c * Matrix4::Identity());
    c = -Mk.trace() / k;
    lin.char_poly[static_cast<size_t>(k)] = c;
  }

  Eigen::EigenSolver<Matrix4> es(A);
  for (int i = 0; i < 4; ++i) lin.jacobian_eigenvalues[static_cast<size_t>(i)] = es.eigenvalues()[i];
  return lin;
}

// ---------------------------------------------------------------------------
// Discrete symmetries
// ---------------------------------------------------------------------------

Trajectory apply_symmetry(const Trajectory& traj, SymmetryKind kind) {
  Trajectory out;
  out.status = traj.status;
  out.message = traj.message;
  const size_t n = traj.size();
  out.t.reserve(n);
  out.y.reserve(n);
  out.f.reserve(n);

  auto scaled = [](const Vector& y, std::initializer_list<double> signs) {
    Vector s(5);
    int i = 0;
    for (double sg : signs) s[i] = sg * y[i], ++i;
    return s;
  };

  switch (kind) {
    case SymmetryKind::Reflection:
      for (size_t i = 0; i < n; ++i) {
        out.t.push_back(traj.t[i]);
        out.y.push_back(scaled(traj.y[i], {1, 1, -1, 1, -1}));
        out.f.push_back(scaled(traj.f[i], {1, 1, -1, 1, -1}));
      }
      break;
    case SymmetryKind::VelocityReversal:
      for (size_t i = 0; i < n; ++i) {
        out.t.push_back(traj.t[i]);
        out.y.push_back(scaled(traj.y[i], {-1, -1, 1, -1, -1}));
        out.f.push_back(scaled(traj.f[i], {-1, -1, 1, -1, -1}));
      }
      break;
    case SymmetryKind::TimeReversal:
      for (size_t i = n; i-- > 0;) {
        out.t.push_back(-traj.t[i]);
        out.y.push_back(scaled(traj.y[i], {1, -1, -1, 1, 1}));
        out.f.push_back(-scaled(traj.f[i], {1, -1, -1, 1, 1}));
      }
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Equators
// ---------------------------------------------------------------------------

EquatorPoint analytic_equator(double t, double mu, double r, double beta, double a0, double v0) {
  auto speed = [&](double s) {
    return v0 + (a0 / beta) * s - (mu / (2.0 * r * beta)) * s * s;
  };
  // v must stay positive on the whole window [0, t].
  const double lo = std::min(0.0, t), hi = std::max(0.0, t);
  double vmin = std::min(speed(lo), speed(hi));
  if (mu != 0.0) {
    const double s_crit = a0 * r / mu;
    if (s_crit > lo && s_crit < hi) vmin = std::min(vmin, speed(s_crit));
  }
  if (!(vmin > 0.0))
    throw VelocitySingularityError("analytic_equator: v reaches 0 inside the window");

  EquatorPoint out;
  out.v = speed(t);
  out.a = a0 - (mu / r) * t;
  out.angle = v0 * t / r + a0 * t * t / (2.0 * beta * r) -
              mu * t * t * t / (6.0 * beta * r * r);
  out.gamma = r * Vector3(std::sin(out.angle), 0.0, std::cos(out.angle));
  return out;
}

// ---------------------------------------------------------------------------
// Regularized integration through v = 0
// ---------------------------------------------------------------------------

RegularizedTrajectory integrate_reduced_regularized(const ReducedState& init, double beta,
                                                    double t0, double t1,
                                                    const RegularizationOptions& opts) {
  if (!(opts.v_switch > kVelocityFloor) || !(opts.v_resume > opts.v_switch))
    throw InputError("regularized integration: need v_resume > v_switch > velocity floor");

  RegularizedTrajectory out;
  const ReducedParams prm{beta, 1.0};
  const OdeField red_field = reduced_ode_field(prm);
  const OdeField cl_field = crouch_leite_ode_field(beta, 1.0);

  double t = t0;
  ReducedState state = init;
  constexpr int kMaxLifts = 64;

  auto append_reduced = [&](const Trajectory& piece, size_t from) {
    for (size_t i = from; i < piece.size(); ++i) {
      out.reduced.t.push_back(piece.t[i]);
      out.reduced.y.push_back(piece.y[i]);
      out.reduced.f.push_back(piece.f[i]);
    }
  };

  while (t < t1) {
    // Reduced leg: run until the speed dips to the hand-over threshold.
    const StepObserver watch = [&](double, const Vector&, const Vector&, double,
                                   const Vector& y, const Vector&) {
      return y[0] > opts.v_switch;
    };
    Trajectory leg = integrate_observed(red_field, pack_reduced(state), t, t1,
                                        opts.integrator, watch, true);
    append_reduced(leg, out.reduced.size() == 0 ? 0 : 1);
    t = leg.t.back();
    state = unpack_reduced(leg.y.back());

    if (leg.status == IntegrateStatus::Done) {
      out.ok = true;
      return out;
    }
    const bool near_singular = state.v <= opts.v_switch * (1.0 + 1e-9);
    if (!near_singular || leg.status == IntegrateStatus::MaxSteps) {
      out.message = "reduced leg failed: " + to_string(leg.status) +
                    (leg.message.empty() ? "" : " (" + leg.message + ")");
      return out;
    }
    if (static_cast<int>(out.lifted_spans.size()) >= kMaxLifts) {
      out.message = "too many v=0 regularization hand-overs";
      return out;
    }

    // Extrinsic leg: lift on the identity frame, coast through x1 = 0,
    // return once the speed recovers. The projection is SO(3)-invariant,
    // so the frame choice does not affect the continued reduced solution.
    const double lift_t = t;
    const double t_stop = std::min(t1, t + opts.max_lift_span);
    const StepObserver recover = [&](double, const Vector&, const Vector&, double tt,
                                     const Vector& y, const Vector&) {
      const double speed = y.segment<3>(3).norm();
      if (speed > kVelocityFloor) {
        ExtrinsicSphereState es = unpack_extrinsic(y, 1.0);
        const ReducedState rs = poisson_project(es);
        out.reduced.t.push_back(tt);
        out.reduced.y.push_back(pack_reduced(rs));
        out.reduced.f.push_back(pack_reduced(reduced_field_cartesian(rs, prm)));
      }
      return speed < opts.v_resume;
    };
    Trajectory cl = integrate_observed(cl_field, pack_extrinsic(poisson_lift(state)),
                                       t, t_stop, opts.integrator, recover, false);
    if (!cl.ok()) {
      out.message = "extrinsic leg failed: " + to_string(cl.status) +
                    (cl.message.empty() ? "" : " (" + cl.message + ")");
      return out;
    }
    t = cl.t.back();
    out.lifted_spans.emplace_back(lift_t, t);
    const ExtrinsicSphereState es = unpack_extrinsic(cl.y.back(), 1.0);
    const double speed = es.x1.norm();
    if (cl.status == IntegrateStatus::Done && t >= t1) {
      // Window ended inside the extrinsic leg.
      if (speed > kVelocityFloor) {
        const ReducedState rs = poisson_project(es);
        if (out.reduced.t.empty() || out.reduced.t.back() != t) {
          out.reduced.t.push_back(t);
          out.reduced.y.push_back(pack_reduced(rs));
          out.reduced.f.push_back(pack_reduced(reduced_field_cartesian(rs, prm)));
        }
      }
      out.ok = true;
      return out;
    }
    if (speed < opts.v_resume) {
      out.message = "speed did not recover within the lift span";
      return out;
    }
    state = poisson_project(es);
  }
  out.ok = true;
  return out;
}

} // namespace splinelab
