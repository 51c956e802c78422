#ifndef SPLINELAB_GEOMETRY_HPP
#define SPLINELAB_GEOMETRY_HPP

#include <memory>
#include <string>
#include <vector>

#include "splinelab/types.hpp"

namespace splinelab {

/// Rank-3 coefficient array T(k,i,j), used for Christoffel symbols
/// Gamma^k_{ij} with the upper index first.
class Tensor3 {
public:
  Tensor3() = default;
  explicit Tensor3(int n) : n_(n), v_(static_cast<size_t>(n) * n * n, 0.0) {}
  int dim() const { return n_; }
  double& operator()(int k, int i, int j) { return v_[(static_cast<size_t>(k) * n_ + i) * n_ + j]; }
  double operator()(int k, int i, int j) const { return v_[(static_cast<size_t>(k) * n_ + i) * n_ + j]; }

private:
  int n_ = 0;
  std::vector<double> v_;
};

/// Rank-4 coefficient array R(l,i,j,k) storing the curvature components
/// R^l_{ijk} = <dx^l, R(d_i, d_j) d_k>.
class Tensor4 {
public:
  Tensor4() = default;
  explicit Tensor4(int n) : n_(n), v_(static_cast<size_t>(n) * n * n * n, 0.0) {}
  int dim() const { return n_; }
  double& operator()(int l, int i, int j, int k) {
    return v_[((static_cast<size_t>(l) * n_ + i) * n_ + j) * n_ + k];
  }
  double operator()(int l, int i, int j, int k) const {
    return v_[((static_cast<size_t>(l) * n_ + i) * n_ + j) * n_ + k];
  }

private:
  int n_ = 0;
  std::vector<double> v_;
};

/// A Riemannian geometry presented in a single chart: metric, cometric,
/// Christoffel symbols and curvature tensor as functions of the chart point.
///
/// Derived classes must supply the metric; the cometric defaults to the
/// matrix inverse, the Christoffel symbols to central differences of the
/// metric, and the curvature to the Christoffel-derivative formula.
class ChartGeometry {
public:
  virtual ~ChartGeometry() = default;

  virtual int dim() const = 0;
  virtual std::string name() const = 0;

  /// Domain predicate. Base version only checks size and finiteness.
  virtual bool valid(const Vector& x) const;
  /// Throws DomainError when valid(x) fails.
  void require_valid(const Vector& x) const;

  virtual Matrix metric(const Vector& x) const = 0;
  virtual Matrix cometric(const Vector& x) const;
  virtual Tensor3 christoffel(const Vector& x) const;
  virtual Tensor4 curvature(const Vector& x) const;

  /// True when curvature() is closed-form rather than finite differences.
  virtual bool analytic_curvature() const { return false; }
};

/// Central-difference step used throughout the geometry module.
double fd_step(const Vector& x);

/// Raises the covector index: g(sharp(alpha), w) = <alpha, w> for all w.
Vector sharp(const ChartGeometry& geom, const Vector& x, const Vector& alpha);

/// Lowers a vector index with the metric.
Vector lower(const ChartGeometry& geom, const Vector& x, const Vector& u);

/// R^l_{ijk} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
///            + Gamma^t_{jk} Gamma^l_{it} - Gamma^t_{ik} Gamma^l_{jt},
/// with the Christoffel derivatives taken by central differences.
Tensor4 curvature_from_christoffel(const ChartGeometry& geom, const Vector& x);

/// Max-norm residual of d_i g^{ab} + Gamma^a_{ic} g^{cb} + Gamma^b_{ic} g^{ac}.
double metric_compatibility_residual(const ChartGeometry& geom, const Vector& x);

/// Euclidean R^n.
class FlatGeometry final : public ChartGeometry {
public:
  explicit FlatGeometry(int n);
  int dim() const override { return n_; }
  std::string name() const override;
  Matrix metric(const Vector& x) const override;
  Matrix cometric(const Vector& x) const override;
  Tensor3 christoffel(const Vector& x) const override;
  Tensor4 curvature(const Vector& x) const override;
  bool analytic_curvature() const override { return true; }

private:
  int n_;
};

/// Sphere S^2(r) in the colatitude/longitude chart (theta, phi) with
/// theta restricted to (delta, pi - delta). Pole neighbourhoods are the
/// business of the extrinsic sphere module, not of this chart.
class SphereChartGeometry final : public ChartGeometry {
public:
  explicit SphereChartGeometry(double radius);
  int dim() const override { return 2; }
  std::string name() const override;
  bool valid(const Vector& x) const override;
  Matrix metric(const Vector& x) const override;
  Matrix cometric(const Vector& x) const override;
  Tensor3 christoffel(const Vector& x) const override;
  Tensor4 curvature(const Vector& x) const override;
  bool analytic_curvature() const override { return true; }

  double radius() const { return r_; }
  static constexpr double kPoleMargin = 1e-6;

  /// Chart -> ambient embedding and its Jacobian.
  Vector3 embed(const Vector& x) const;
  Eigen::Matrix<double, 3, 2> embed_jacobian(const Vector& x) const;

private:
  double r_;
};

/// Cauchy kernel G(s) = 1/(1+s^2) and its derivative.
double cauchy_kernel(double s);
double cauchy_kernel_derivative(double s);

/// Two landmarks on the line with the Cauchy-kernel cometric
/// g^{-1} = [[1, G], [G, 1]], G = G(x1 - x2). The metric degenerates at
/// landmark coincidence, so the chart domain excludes |x1 - x2| below a
/// small margin. Geodesics (the only shipped dynamics for this geometry)
/// are handled by landmark_geodesic_field, which needs no inverse and is
/// globally smooth.
class LandmarkPairGeometry final : public ChartGeometry {
public:
  LandmarkPairGeometry() = default;
  int dim() const override { return 2; }
  std::string name() const override;
  bool valid(const Vector& x) const override;
  Matrix metric(const Vector& x) const override;
  Matrix cometric(const Vector& x) const override;

  static constexpr double kSeparationMargin = 1e-3;
};

/// Hamiltonian field of 2H = p1^2 + p2^2 + 2 G(x1-x2) p1 p2 on the state
/// (x1, x2, p1, p2).
Eigen::Vector4d landmark_geodesic_field(const Eigen::Vector4d& state);
double landmark_hamiltonian(const Eigen::Vector4d& state);

/// Geometry lookup by identifier: "flat:<n>", "sphere-chart:<r>",
/// "landmark-1d-2pt". Throws InputError for anything else.
std::unique_ptr<ChartGeometry> make_geometry(const std::string& id);

} // namespace splinelab

#endif
