#ifndef SPLINELAB_ANALYSIS_HPP
#define SPLINELAB_ANALYSIS_HPP

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "splinelab/ode.hpp"
#include "splinelab/sphere.hpp"
#include "splinelab/types.hpp"

namespace splinelab {

/// Poincare-section experiment: reduced S^2 flow in (v, a, theta, z),
/// section theta = pi/2 at fixed energy h and Casimir mu.
struct SectionSpec {
  double h = 0.0;
  double mu = 2.0;
  double beta = 1.0;
  double r = 2.0;
  int direction = +1;                          // theta-dot sign at crossings; 0 = both
  std::vector<std::pair<double, double>> seeds; // (v, z) seeded on the section
  int crossings_per_seed = 256;
  double max_time = 1e4;
  double v_max_factor = 1e3;                   // escape when v > factor * r
  IntegratorConfig integrator{};
  int threads = 1;
};

struct SectionPoint {
  int seed_id = 0;
  int crossing_index = 0;
  double t = 0.0;
  double v = 0.0, a = 0.0, z = 0.0;
  double h_check = 0.0;        // |H - h|
  double casimir_check = 0.0;  // recomputed |M|
};

struct SeedOutcome {
  int seed_id = 0;
  double v_seed = 0.0, z_seed = 0.0, a_seed = 0.0;
  bool infeasible = false;
  bool escaped = false;
  bool aborted = false;
  bool time_capped = false;
  int crossings = 0;
  double end_time = 0.0;
  std::string note;
};

struct SectionPointSet {
  std::vector<SectionPoint> points;
  std::vector<SeedOutcome> seeds;

  int escapes() const;
  int confined() const;
};

/// Energy tolerance every emitted section point must satisfy.
inline constexpr double kSectionEnergyTol = 1e-9;

/// a >= 0 on the section from the energy relation at theta = pi/2;
/// nullopt when the radicand is negative (infeasible seed).
std::optional<double> seed_on_section(double h, double mu, double beta, double r,
                                      double v, double z);

/// Run every seed until its crossing budget, escape, or the time cap.
/// Crossing times are refined by bisection on re-integrated substeps and
/// every emitted point is re-checked against the energy tolerance.
SectionPointSet poincare_section(const SectionSpec& spec);

// ---------------------------------------------------------------------------
// Conserved-quantity auditing
// ---------------------------------------------------------------------------

using NamedQuantity = std::pair<std::string, std::function<double(double, const Vector&)>>;

struct DriftEntry {
  std::string name;
  double initial = 0.0;
  double max_abs_drift = 0.0;
  double max_rel_drift = 0.0;  // relative to 1 + |initial|
};

std::vector<DriftEntry> conserved_audit(const Trajectory& traj,
                                        const std::vector<NamedQuantity>& quantities);

// ---------------------------------------------------------------------------
// Curve-thinness statistic for section point sets
// ---------------------------------------------------------------------------

struct CurveStat {
  double diameter = 0.0;      // in range-normalized coordinates
  double max_residual = 0.0;  // to the truncated-Fourier closed curve
  double ratio = 0.0;         // max_residual / diameter
};

/// Fit a closed curve r(angle) (truncated Fourier series in the principal
/// plane of the normalized point cloud) and report the worst deviation
/// relative to the set diameter. Degenerate clouds report ratio 0.
CurveStat curve_thinness(const std::vector<Vector3>& points, int harmonics = 8);

// ---------------------------------------------------------------------------
// SVG scatter rendering
// ---------------------------------------------------------------------------

struct SvgBounds {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
};

/// Deterministic scatter plot: one marker per point, labelled axes, the
/// annotation list rendered in the header. Throws InputError when empty.
std::string svg_scatter(const std::vector<Eigen::Vector2d>& points,
                        const std::string& x_label, const std::string& y_label,
                        const SvgBounds& bounds,
                        const std::vector<std::pair<std::string, std::string>>& annotations);

} // namespace splinelab

#endif
