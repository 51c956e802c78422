#include <doctest.h>

#include "splinelab/geometry.hpp"
#include "splinelab/ode.hpp"
#include "test_util.hpp"

using namespace splinelab;
using sltest::random_point;
using sltest::random_vector;

namespace {

Vector pt(double a, double b) {
  Vector x(2);
  x << a, b;
  return x;
}

// Sectional curvature in an orthogonal 2d chart from R^l_{ijk}.
double sectional_curvature(const ChartGeometry& geom, const Vector& x, const Tensor4& R) {
  const Matrix g = geom.metric(x);
  double num = 0.0;
  for (int l = 0; l < 2; ++l) num += g(0, l) * R(l, 0, 1, 1);
  return num / (g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0));
}

std::vector<std::unique_ptr<ChartGeometry>> shipped_geometries() {
  std::vector<std::unique_ptr<ChartGeometry>> out;
  out.push_back(make_geometry("flat:2"));
  out.push_back(make_geometry("flat:3"));
  out.push_back(make_geometry("sphere-chart:1"));
  out.push_back(make_geometry("sphere-chart:2"));
  out.push_back(make_geometry("landmark-1d-2pt"));
  return out;
}

} // namespace

TEST_CASE("curvature from Christoffel symbols") {
  SUBCASE("flat space is curvature-free") {
    FlatGeometry flat(2);
    const Tensor4 R = curvature_from_christoffel(flat, pt(0.3, -1.2));
    for (int l = 0; l < 2; ++l)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          for (int k = 0; k < 2; ++k) CHECK(R(l, i, j, k) == 0.0);
  }
  SUBCASE("unit sphere has sectional curvature 1") {
    SphereChartGeometry s(1.0);
    const Vector x = pt(M_PI / 2.0, 0.4);
    const Tensor4 R = curvature_from_christoffel(s, x);
    CHECK(sectional_curvature(s, x, R) == doctest::Approx(1.0).epsilon(1e-7));
  }
  SUBCASE("radius-2 sphere has sectional curvature 1/4") {
    SphereChartGeometry s(2.0);
    const Vector x = pt(M_PI / 2.0, -1.1);
    const Tensor4 R = curvature_from_christoffel(s, x);
    CHECK(sectional_curvature(s, x, R) == doctest::Approx(0.25).epsilon(1e-7));
  }
  SUBCASE("finite differences agree with the closed form on the sphere") {
    SphereChartGeometry s(1.0);
    SplitMix64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const Vector x = random_point(s, rng);
      const Tensor4 Rfd = curvature_from_christoffel(s, x);
      const Tensor4 Ran = s.curvature(x);
      for (int l = 0; l < 2; ++l)
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
              CHECK(std::abs(Rfd(l, i, j, k) - Ran(l, i, j, k)) < 1e-5);
    }
  }
  SUBCASE("outside the chart domain") {
    SphereChartGeometry s(1.0);
    CHECK_THROWS_AS(curvature_from_christoffel(s, pt(0.0, 0.0)), DomainError);
  }
}

TEST_CASE("sharp raises indices against the metric") {
  SUBCASE("flat identity") {
    FlatGeometry flat(2);
    Vector alpha = pt(1.0, 2.0);
    CHECK((sharp(flat, pt(0.0, 0.0), alpha) - alpha).norm() < 1e-14);
  }
  SUBCASE("sphere chart diagonal inverse") {
    SphereChartGeometry s(1.0);
    const Vector u = sharp(s, pt(M_PI / 3.0, 0.0), pt(0.0, 1.0));
    CHECK(u[0] == doctest::Approx(0.0).epsilon(1e-12));
    const double s2 = std::sin(M_PI / 3.0) * std::sin(M_PI / 3.0);
    CHECK(u[1] == doctest::Approx(1.0 / s2).epsilon(1e-12));
  }
  SUBCASE("sharp of zero is zero") {
    for (const auto& geom : shipped_geometries()) {
      SplitMix64 rng(5);
      const Vector x = random_point(*geom, rng);
      CHECK(sharp(*geom, x, Vector::Zero(geom->dim())).norm() == 0.0);
    }
  }
  SUBCASE("defining identity g(sharp(alpha), w) = <alpha, w>") {
    SplitMix64 rng(17);
    for (const auto& geom : shipped_geometries()) {
      for (int trial = 0; trial < 20; ++trial) {
        const Vector x = random_point(*geom, rng);
        const Vector alpha = random_vector(geom->dim(), rng);
        const Vector u = sharp(*geom, x, alpha);
        const Matrix g = geom->metric(x);
        for (int w = 0; w < geom->dim(); ++w)
          CHECK(std::abs((g * u)[w] - alpha[w]) < 1e-12 * (1.0 + alpha.norm()));
      }
    }
  }
}

TEST_CASE("two-landmark geodesic field") {
  using V4 = Eigen::Vector4d;
  SUBCASE("zero momentum is stationary") {
    CHECK(landmark_geodesic_field(V4(0.7, -0.3, 0.0, 0.0)).norm() == 0.0);
  }
  SUBCASE("coincident landmarks with equal momenta") {
    const V4 f = landmark_geodesic_field(V4(0.5, 0.5, 1.0, 1.0));
    CHECK(f[0] == doctest::Approx(2.0));
    CHECK(f[1] == doctest::Approx(2.0));
    CHECK(f[2] == 0.0);
    CHECK(f[3] == 0.0);
  }
  SUBCASE("unit separation") {
    const V4 f = landmark_geodesic_field(V4(0.0, 1.0, 1.0, 0.0));
    CHECK(f[0] == doctest::Approx(1.0));
    CHECK(f[1] == doctest::Approx(0.5));
  }
  SUBCASE("Hamiltonian conserved along integration") {
    IntegratorConfig cfg;
    cfg.tol = 1e-12;
    const OdeField field = [](double, const Vector& y, Vector& dy) {
      dy = landmark_geodesic_field(V4(y));
    };
    Vector y0(4);
    y0 << 0.0, 1.3, 0.8, 0.4; // separating pair; momenta stay O(1)
    const double H0 = landmark_hamiltonian(V4(y0));
    const Trajectory traj = integrate(field, y0, 0.0, 10.0, cfg);
    REQUIRE(traj.ok());
    double drift = 0.0;
    for (const auto& y : traj.y)
      drift = std::max(drift, std::abs(landmark_hamiltonian(V4(y)) - H0));
    CHECK(drift < 1e-10);
  }
}

TEST_CASE("metric compatibility residual") {
  SUBCASE("flat is exactly compatible") {
    FlatGeometry flat(3);
    Vector x(3);
    x << 0.1, 0.2, 0.3;
    CHECK(metric_compatibility_residual(flat, x) == 0.0);
  }
  SUBCASE("sphere charts satisfy the identity to finite-difference accuracy") {
    CHECK(metric_compatibility_residual(SphereChartGeometry(1.0), pt(1.0, 0.0)) < 1e-8);
    CHECK(metric_compatibility_residual(SphereChartGeometry(2.0), pt(0.5, 2.0)) < 1e-8);
  }
}

TEST_CASE("random-point geometry invariants") {
  SplitMix64 rng(20260810);
  for (const auto& geom : shipped_geometries()) {
    CAPTURE(geom->name());
    for (int trial = 0; trial < 100; ++trial) {
      const Vector x = random_point(*geom, rng);
      const Matrix g = geom->metric(x);
      const Matrix ginv = geom->cometric(x);
      const int n = geom->dim();

      CHECK((ginv * g - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);

      const Tensor3 gamma = geom->christoffel(x);
      for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) CHECK(gamma(k, i, j) == gamma(k, j, i));

      CHECK(metric_compatibility_residual(*geom, x) < 1e-6);

      const Tensor4 R = geom->curvature(x);
      for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) CHECK(R(l, i, j, k) == -R(l, j, i, k));
    }
  }
}

TEST_CASE("geometry lookup") {
  CHECK(make_geometry("flat:4")->dim() == 4);
  CHECK(make_geometry("sphere-chart:2.5")->name() == "sphere-chart:2.5");
  CHECK(make_geometry("landmark-1d-2pt")->dim() == 2);
  CHECK_THROWS_AS(make_geometry("torus:1"), InputError);
  CHECK_THROWS_AS(make_geometry("flat:x"), InputError);
  CHECK_THROWS_AS(make_geometry("flat:0"), InputError);

  SUBCASE("domain predicates") {
    const auto sphere = make_geometry("sphere-chart:1");
    CHECK_FALSE(sphere->valid(pt(0.0, 0.0)));
    CHECK_FALSE(sphere->valid(pt(M_PI, 0.0)));
    CHECK(sphere->valid(pt(1.0, 5.0)));
    const auto lm = make_geometry("landmark-1d-2pt");
    CHECK_FALSE(lm->valid(pt(0.5, 0.5)));
    CHECK_THROWS_AS(lm->metric(pt(0.5, 0.5)), DomainError);
  }
}
