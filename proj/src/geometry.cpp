#include "splinelab/geometry.hpp"

#include <cmath>
#include <sstream>

namespace splinelab {

double fd_step(const Vector& x) {
  double scale = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
  return 1e-6 * (1.0 + scale);
}

bool ChartGeometry::valid(const Vector& x) const {
  return x.size() == dim() && x.allFinite();
}

void ChartGeometry::require_valid(const Vector& x) const {
  if (!valid(x)) {
    std::ostringstream os;
    os << name() << ": chart point outside domain";
    throw DomainError(os.str());
  }
}

Matrix ChartGeometry::cometric(const Vector& x) const {
  return metric(x).inverse();
}

Tensor3 ChartGeometry::christoffel(const Vector& x) const {
  // Gamma^k_{ij} = 1/2 g^{kl} (d_i g_{lj} + d_j g_{li} - d_l g_{ij})
  const int n = dim();
  const double h = fd_step(x);
  std::vector<Matrix> dg(n);
  for (int i = 0; i < n; ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    dg[i] = (metric(xp) - metric(xm)) / (2.0 * h);
  }
  const Matrix ginv = cometric(x);
  Tensor3 gamma(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l)
          s += ginv(k, l) * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
        gamma(k, i, j) = 0.5 * s;
        gamma(k, j, i) = 0.5 * s;
      }
  return gamma;
}

Tensor4 ChartGeometry::curvature(const Vector& x) const {
  return curvature_from_christoffel(*this, x);
}

Vector sharp(const ChartGeometry& geom, const Vector& x, const Vector& alpha) {
  geom.require_valid(x);
  return geom.metric(x).ldlt().solve(alpha);
}

Vector lower(const ChartGeometry& geom, const Vector& x, const Vector& u) {
  geom.require_valid(x);
  return geom.metric(x) * u;
}

Tensor4 curvature_from_christoffel(const ChartGeometry& geom, const Vector& x) {
  geom.require_valid(x);
  const int n = geom.dim();
  const double h = fd_step(x);
  std::vector<Tensor3> dgamma;
  dgamma.reserve(n);
  for (int i = 0; i < n; ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const Tensor3 gp = geom.christoffel(xp);
    const Tensor3 gm = geom.christoffel(xm);
    Tensor3 d(n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          d(a, b, c) = (gp(a, b, c) - gm(a, b, c)) / (2.0 * h);
    dgamma.push_back(d);
  }
  const Tensor3 gamma = geom.christoffel(x);
  // D(i,j;l,k) = d_i Gamma^l_{jk} + Gamma^t_{jk} Gamma^l_{it}; the curvature
  // is D(i,j) - D(j,i), which keeps the (i,j) antisymmetry exact in floats.
  auto D = [&](int i, int j, int l, int k) {
    double s = dgamma[i](l, j, k);
    for (int t = 0; t < n; ++t) s += gamma(t, j, k) * gamma(l, i, t);
    return s;
  };
  Tensor4 R(n);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          R(l, i, j, k) = D(i, j, l, k) - D(j, i, l, k);
  return R;
}

double metric_compatibility_residual(const ChartGeometry& geom, const Vector& x) {
  geom.require_valid(x);
  const int n = geom.dim();
  const double h = fd_step(x);
  const Tensor3 gamma = geom.christoffel(x);
  const Matrix ginv = geom.cometric(x);
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const Matrix dgi = (geom.cometric(xp) - geom.cometric(xm)) / (2.0 * h);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double s = dgi(a, b);
        for (int c = 0; c < n; ++c)
          s += gamma(a, i, c) * ginv(c, b) + gamma(b, i, c) * ginv(a, c);
        worst = std::max(worst, std::abs(s));
      }
  }
  return worst;
}

// --- flat space ---

FlatGeometry::FlatGeometry(int n) : n_(n) {
  if (n < 1) throw InputError("flat geometry needs dimension >= 1");
}

std::string FlatGeometry::name() const {
  return "flat:" + std::to_string(n_);
}

Matrix FlatGeometry::metric(const Vector& x) const {
  require_valid(x);
  return Matrix::Identity(n_, n_);
}

Matrix FlatGeometry::cometric(const Vector& x) const {
  require_valid(x);
  return Matrix::Identity(n_, n_);
}

Tensor3 FlatGeometry::christoffel(const Vector& x) const {
  require_valid(x);
  return Tensor3(n_);
}

Tensor4 FlatGeometry::curvature(const Vector& x) const {
  require_valid(x);
  return Tensor4(n_);
}

// --- sphere chart ---

SphereChartGeometry::SphereChartGeometry(double radius) : r_(radius) {
  if (!(radius > 0.0)) throw InputError("sphere radius must be positive");
}

std::string SphereChartGeometry::name() const {
  std::ostringstream os;
  os << "sphere-chart:" << r_;
  return os.str();
}

bool SphereChartGeometry::valid(const Vector& x) const {
  if (!ChartGeometry::valid(x)) return false;
  const double theta = x[0];
  return theta > kPoleMargin && theta < M_PI - kPoleMargin;
}

Matrix SphereChartGeometry::metric(const Vector& x) const {
  require_valid(x);
  const double s = std::sin(x[0]);
  Matrix g = Matrix::Zero(2, 2);
  g(0, 0) = r_ * r_;
  g(1, 1) = r_ * r_ * s * s;
  return g;
}

Matrix SphereChartGeometry::cometric(const Vector& x) const {
  require_valid(x);
  const double s = std::sin(x[0]);
  Matrix g = Matrix::Zero(2, 2);
  g(0, 0) = 1.0 / (r_ * r_);
  g(1, 1) = 1.0 / (r_ * r_ * s * s);
  return g;
}

Tensor3 SphereChartGeometry::christoffel(const Vector& x) const {
  require_valid(x);
  const double theta = x[0];
  Tensor3 gamma(2);
  gamma(0, 1, 1) = -std::sin(theta) * std::cos(theta);
  gamma(1, 0, 1) = gamma(1, 1, 0) = std::cos(theta) / std::sin(theta);
  return gamma;
}

Tensor4 SphereChartGeometry::curvature(const Vector& x) const {
  require_valid(x);
  // Constant sectional curvature 1/r^2:
  // R^l_{ijk} = (g_{jk} delta^l_i - g_{ik} delta^l_j) / r^2.
  const Matrix g = metric(x);
  const double invr2 = 1.0 / (r_ * r_);
  Tensor4 R(2);
  for (int l = 0; l < 2; ++l)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
          R(l, i, j, k) = (g(j, k) * (l == i) - g(i, k) * (l == j)) * invr2;
  return R;
}

Vector3 SphereChartGeometry::embed(const Vector& x) const {
  require_valid(x);
  const double st = std::sin(x[0]), ct = std::cos(x[0]);
  const double sp = std::sin(x[1]), cp = std::cos(x[1]);
  return r_ * Vector3(st * cp, st * sp, ct);
}

Eigen::Matrix<double, 3, 2> SphereChartGeometry::embed_jacobian(const Vector& x) const {
  require_valid(x);
  const double st = std::sin(x[0]), ct = std::cos(x[0]);
  const double sp = std::sin(x[1]), cp = std::cos(x[1]);
  Eigen::Matrix<double, 3, 2> J;
  J << r_ * ct * cp, -r_ * st * sp,
       r_ * ct * sp,  r_ * st * cp,
      -r_ * st,       0.0;
  return J;
}

// --- two landmarks on the line ---

double cauchy_kernel(double s) { return 1.0 / (1.0 + s * s); }

double cauchy_kernel_derivative(double s) {
  const double d = 1.0 + s * s;
  return -2.0 * s / (d * d);
}

std::string LandmarkPairGeometry::name() const { return "landmark-1d-2pt"; }

bool LandmarkPairGeometry::valid(const Vector& x) const {
  if (!ChartGeometry::valid(x)) return false;
  return std::abs(x[0] - x[1]) > kSeparationMargin;
}

Matrix LandmarkPairGeometry::cometric(const Vector& x) const {
  require_valid(x);
  const double G = cauchy_kernel(x[0] - x[1]);
  Matrix c(2, 2);
  c << 1.0, G, G, 1.0;
  return c;
}

Matrix LandmarkPairGeometry::metric(const Vector& x) const {
  require_valid(x);
  const double G = cauchy_kernel(x[0] - x[1]);
  const double det = 1.0 - G * G;
  Matrix g(2, 2);
  g << 1.0 / det, -G / det, -G / det, 1.0 / det;
  return g;
}

Eigen::Vector4d landmark_geodesic_field(const Eigen::Vector4d& state) {
  const double s = state[0] - state[1];
  const double p1 = state[2], p2 = state[3];
  const double G = cauchy_kernel(s);
  const double dG = cauchy_kernel_derivative(s);
  Eigen::Vector4d f;
  f[0] = p1 + G * p2;
  f[1] = p2 + G * p1;
  f[2] = -dG * p1 * p2;
  f[3] = dG * p1 * p2;
  return f;
}

double landmark_hamiltonian(const Eigen::Vector4d& state) {
  const double G = cauchy_kernel(state[0] - state[1]);
  return 0.5 * (state[2] * state[2] + state[3] * state[3]) + G * state[2] * state[3];
}

std::unique_ptr<ChartGeometry> make_geometry(const std::string& id) {
  const auto colon = id.find(':');
  const std::string kind = id.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : id.substr(colon + 1);
  if (kind == "flat") {
    int n = 0;
    try {
      n = std::stoi(arg);
    } catch (const std::exception&) {
      throw InputError("bad flat dimension in geometry id '" + id + "'");
    }
    return std::make_unique<FlatGeometry>(n);
  }
  if (kind == "sphere-chart") {
    double r = 0.0;
    try {
      r = std::stod(arg);
    } catch (const std::exception&) {
      throw InputError("bad sphere radius in geometry id '" + id + "'");
    }
    return std::make_unique<SphereChartGeometry>(r);
  }
  if (id == "landmark-1d-2pt") return std::make_unique<LandmarkPairGeometry>();
  throw InputError("unknown geometry id '" + id + "'");
}

} // namespace splinelab
