#include "splinelab/pmp.hpp"

#include <cmath>

namespace splinelab {

SplitState SplitState::zero(int n) {
  return {Vector::Zero(n), Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
}

SplitTangent SplitTangent::zero(int n) {
  return {Vector::Zero(n), Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
}

CostModel CostModel::cubic(double beta) {
  if (!(beta > 0.0)) throw InputError("cubic cost: beta must be positive");
  CostModel c;
  c.kind = Kind::Cubic;
  c.beta = beta;
  return c;
}

CostModel CostModel::time_minimal(double bound) {
  if (!(bound > 0.0)) throw InputError("time-minimal cost: bound must be positive");
  CostModel c;
  c.kind = Kind::TimeMinimal;
  c.bound = bound;
  return c;
}

double cost_profile(const CostModel& cost, double s) {
  return cost.is_cubic() ? 0.5 * cost.beta * s : 1.0;
}

double legendre_dual(const CostModel& cost, double s) {
  return cost.is_cubic() ? s / (2.0 * cost.beta) : -1.0 + cost.bound * std::sqrt(s);
}

Vector optimal_control(const ChartGeometry& geom, const CostModel& cost, const SplitState& s) {
  const Vector a_sharp = sharp(geom, s.x, s.alpha);
  if (cost.is_cubic()) return a_sharp / cost.beta;
  const double norm = std::sqrt(std::max(0.0, s.alpha.dot(a_sharp)));
  if (norm < kSingularControlGuard)
    throw SingularControlError("time-minimal control singular: |alpha-sharp| < 1e-10");
  return (cost.bound / norm) * a_sharp;
}

double optimal_hamiltonian(const ChartGeometry& geom, const CostModel& cost, const SplitState& s) {
  const double saa = s.alpha.dot(geom.cometric(s.x) * s.alpha);
  return s.p.dot(s.v) + legendre_dual(cost, std::max(0.0, saa));
}

SplitState split_field(const ChartGeometry& geom, const CostModel& cost, const SplitState& s) {
  geom.require_valid(s.x);
  const int n = geom.dim();
  const Vector u = optimal_control(geom, cost, s);
  const Tensor3 gamma = geom.christoffel(s.x);
  const Tensor4 R = geom.curvature(s.x);

  SplitState d = SplitState::zero(n);
  d.x = s.v;
  for (int a = 0; a < n; ++a) {
    double acc = u[a];
    for (int i = 0; i < n; ++i)
      for (int b = 0; b < n; ++b) acc -= gamma(a, i, b) * s.v[i] * s.v[b];
    d.v[a] = acc;
  }
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int b = 0; b < n; ++b) {
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) acc += s.alpha[b] * R(b, i, j, k) * s.v[j] * s.v[k];
      for (int a = 0; a < n; ++a) acc += gamma(b, i, a) * s.v[a] * s.p[b];
    }
    d.p[i] = acc;
  }
  for (int a = 0; a < n; ++a) {
    double acc = -s.p[a];
    for (int b = 0; b < n; ++b)
      for (int i = 0; i < n; ++i) acc += gamma(b, i, a) * s.v[i] * s.alpha[b];
    d.alpha[a] = acc;
  }
  return d;
}

CanonicalState split_to_canonical(const ChartGeometry& geom, const SplitState& s) {
  geom.require_valid(s.x);
  const int n = geom.dim();
  const Tensor3 gamma = geom.christoffel(s.x);
  CanonicalState c;
  c.x = s.x;
  c.v = s.v;
  c.alpha_tilde = s.alpha;
  c.p_tilde = s.p;
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j) acc += gamma(k, i, j) * s.v[j] * s.alpha[k];
    c.p_tilde[i] += acc;
  }
  return c;
}

SplitState canonical_to_split(const ChartGeometry& geom, const CanonicalState& c) {
  geom.require_valid(c.x);
  const int n = geom.dim();
  const Tensor3 gamma = geom.christoffel(c.x);
  SplitState s;
  s.x = c.x;
  s.v = c.v;
  s.alpha = c.alpha_tilde;
  s.p = c.p_tilde;
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j) acc += gamma(k, i, j) * c.v[j] * c.alpha_tilde[k];
    s.p[i] -= acc;
  }
  return s;
}

double symplectic_form_split(const ChartGeometry& geom, const SplitState& s,
                             const SplitTangent& X, const SplitTangent& Y) {
  geom.require_valid(s.x);
  const int n = geom.dim();
  const Tensor3 gamma = geom.christoffel(s.x);
  const Tensor4 R = geom.curvature(s.x);

  auto dv_conn = [&](const SplitTangent& T, int a) {
    double acc = T.dv[a];
    for (int i = 0; i < n; ++i)
      for (int b = 0; b < n; ++b) acc += gamma(a, i, b) * s.v[b] * T.dx[i];
    return acc;
  };
  auto dalpha_conn = [&](const SplitTangent& T, int a) {
    double acc = T.dalpha[a];
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < n; ++c) acc -= gamma(c, j, a) * s.alpha[c] * T.dx[j];
    return acc;
  };

  double omega = X.dx.dot(Y.dp) - Y.dx.dot(X.dp);
  for (int a = 0; a < n; ++a)
    omega += dv_conn(X, a) * dalpha_conn(Y, a) - dv_conn(Y, a) * dalpha_conn(X, a);
  // R^b_{ija} is antisymmetric in (i,j), so the -1/2 R dx^i ^ dx^j term
  // contracts to a single signed sum.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double cij = 0.0;
      for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) cij += R(b, i, j, a) * s.v[a] * s.alpha[b];
      omega -= cij * X.dx[i] * Y.dx[j];
    }
  return omega;
}

Vector pack_split(const SplitState& s) {
  const int n = s.dim();
  Vector y(4 * n);
  y << s.x, s.v, s.p, s.alpha;
  return y;
}

SplitState unpack_split(const Vector& y, int dim) {
  if (y.size() != 4 * dim) throw InputError("unpack_split: bad state size");
  SplitState s;
  s.x = y.segment(0, dim);
  s.v = y.segment(dim, dim);
  s.p = y.segment(2 * dim, dim);
  s.alpha = y.segment(3 * dim, dim);
  return s;
}

OdeField split_ode_field(const ChartGeometry& geom, const CostModel& cost) {
  const int n = geom.dim();
  return [&geom, cost, n](double, const Vector& y, Vector& dy) {
    const SplitState d = split_field(geom, cost, unpack_split(y, n));
    dy = pack_split(d);
  };
}

} // namespace splinelab
