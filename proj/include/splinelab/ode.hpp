#ifndef SPLINELAB_ODE_HPP
#define SPLINELAB_ODE_HPP

#include <functional>
#include <string>
#include <vector>

#include "splinelab/types.hpp"

namespace splinelab {

/// Right-hand side of an ODE system: dy = f(t, y).
using OdeField = std::function<void(double t, const Vector& y, Vector& dy)>;

/// Adaptive step control settings. Defaults follow the reconstruction
/// driver conventions used throughout this project (tolerance 1e-13,
/// initial step 0.01, step bounds [1e-8, 0.1]).
struct IntegratorConfig {
  double tol = 1e-13;
  double h0 = 0.01;
  double hmin = 1e-8;
  double hmax = 0.1;
  long max_steps = 50'000'000;

  void validate() const;
};

enum class IntegrateStatus {
  Done,          // reached the end of the requested span
  ObserverStop,  // an observer asked to stop; not a failure
  MaxSteps,      // step budget exhausted; last good state kept
  MinStep,       // error control pushed the step below hmin
  FieldError,    // the field threw (domain/singularity); last good state kept
};

bool integrate_succeeded(IntegrateStatus s);
std::string to_string(IntegrateStatus s);

/// Result of one embedded 7(8) step attempt.
struct StepResult {
  Vector y_next;    // eighth-order advance over h
  double error;     // max_i |err_i| / (1 + |y_i|), from the 7th/8th difference
  double h_suggest; // classical controller: safety 0.9, clamps [x0.1, x4]
};

/// One 13-stage Fehlberg 7(8) step of size h from (t, y). `f_start`, when
/// given, must equal field(t, y) and saves one evaluation.
StepResult rk78_step(const OdeField& field, double t, const Vector& y, double h,
                     double tol, const Vector* f_start = nullptr);

/// Sampled solution curve. Samples carry the field value so that cubic
/// Hermite interpolation is available between them.
class Trajectory {
public:
  std::vector<double> t;
  std::vector<Vector> y;
  std::vector<Vector> f;

  IntegrateStatus status = IntegrateStatus::Done;
  std::string message;
  long steps_accepted = 0;
  long steps_rejected = 0;

  bool ok() const { return integrate_succeeded(status); }
  size_t size() const { return t.size(); }
  double t_front() const { return t.front(); }
  double t_back() const { return t.back(); }

  /// Cubic Hermite interpolation between the bracketing samples.
  Vector sample(double time) const;
};

/// Called after every accepted step with the previous and the new sample.
/// Returning false stops the integration with status ObserverStop.
using StepObserver = std::function<bool(double t_prev, const Vector& y_prev, const Vector& f_prev,
                                        double t_new, const Vector& y_new, const Vector& f_new)>;

/// Adaptive integration over [t0, t1] storing every accepted step.
Trajectory integrate(const OdeField& field, const Vector& y0, double t0, double t1,
                     const IntegratorConfig& cfg);

/// Same, but steps are clamped to land exactly on the given output times
/// and only those samples (plus the initial point) are stored.
Trajectory integrate(const OdeField& field, const Vector& y0, double t0, double t1,
                     const IntegratorConfig& cfg, const std::vector<double>& output_times);

/// Observer-driven integration. Stores only the initial and final samples
/// unless `store` is set, in which case every accepted step is kept.
Trajectory integrate_observed(const OdeField& field, const Vector& y0, double t0, double t1,
                              const IntegratorConfig& cfg, const StepObserver& observer,
                              bool store = false);

/// Scalar event function along a solution.
using EventFn = std::function<double(double t, const Vector& y)>;

struct EventCrossing {
  double t;
  Vector y;
  double g;
};

/// Refine a sign change of g over the bracket [ta, tb], with ya the exact
/// state at ta. Bisection on re-integrated substeps; succeeds when
/// |g| < 1e-12 or the bracket reaches floating-point resolution. Throws
/// ConvergenceError after 128 bisections without either.
EventCrossing refine_crossing(const OdeField& field, double ta, const Vector& ya,
                              double ga, double tb, double gb, const EventFn& g,
                              const IntegratorConfig& cfg);

/// All sign changes of g along the trajectory in the requested direction
/// (+1 up-crossings, -1 down, 0 both), refined per refine_crossing.
std::vector<EventCrossing> find_event(const OdeField& field, const Trajectory& traj,
                                      const EventFn& g, int direction,
                                      const IntegratorConfig& cfg);

} // namespace splinelab

#endif
