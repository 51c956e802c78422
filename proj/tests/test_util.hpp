#ifndef SPLINELAB_TEST_UTIL_HPP
#define SPLINELAB_TEST_UTIL_HPP

#include <memory>
#include <vector>

#include "splinelab/geometry.hpp"
#include "splinelab/rng.hpp"
#include "splinelab/types.hpp"

namespace sltest {

using namespace splinelab;

/// A chart point inside the geometry's domain, away from its boundary.
inline Vector random_point(const ChartGeometry& geom, SplitMix64& rng) {
  const std::string id = geom.name();
  if (id.rfind("sphere-chart", 0) == 0) {
    Vector x(2);
    x << rng.uniform(0.3, M_PI - 0.3), rng.uniform(-M_PI, M_PI);
    return x;
  }
  if (id == "landmark-1d-2pt") {
    Vector x(2);
    x[0] = rng.uniform(-2.0, 2.0);
    const double gap = rng.uniform(0.2, 3.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    x[1] = x[0] + gap;
    return x;
  }
  Vector x(geom.dim());
  for (int i = 0; i < geom.dim(); ++i) x[i] = rng.uniform(-2.0, 2.0);
  return x;
}

inline Vector random_vector(int n, SplitMix64& rng, double scale = 1.0) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.uniform(-1.0, 1.0);
  return v;
}

/// Fourth-order central difference of a scalar function of one parameter.
template <typename F>
double directional_derivative(F&& f, double eps = 1e-4) {
  return (-f(2.0 * eps) + 8.0 * f(eps) - 8.0 * f(-eps) + f(-2.0 * eps)) / (12.0 * eps);
}

} // namespace sltest

#endif
