#include "splinelab/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace splinelab {

namespace {

// Classical 13-stage Fehlberg 7(8) pair, NASA TR R-287 (1968).
constexpr int kStages = 13;

constexpr double kC[kStages] = {
    0.0,       2.0 / 27.0, 1.0 / 9.0, 1.0 / 6.0, 5.0 / 12.0, 1.0 / 2.0, 5.0 / 6.0,
    1.0 / 6.0, 2.0 / 3.0,  1.0 / 3.0, 1.0,       0.0,        1.0};

constexpr double kA[kStages][kStages] = {
    {},
    {2.0 / 27.0},
    {1.0 / 36.0, 1.0 / 12.0},
    {1.0 / 24.0, 0.0, 1.0 / 8.0},
    {5.0 / 12.0, 0.0, -25.0 / 16.0, 25.0 / 16.0},
    {1.0 / 20.0, 0.0, 0.0, 1.0 / 4.0, 1.0 / 5.0},
    {-25.0 / 108.0, 0.0, 0.0, 125.0 / 108.0, -65.0 / 27.0, 125.0 / 54.0},
    {31.0 / 300.0, 0.0, 0.0, 0.0, 61.0 / 225.0, -2.0 / 9.0, 13.0 / 900.0},
    {2.0, 0.0, 0.0, -53.0 / 6.0, 704.0 / 45.0, -107.0 / 9.0, 67.0 / 90.0, 3.0},
    {-91.0 / 108.0, 0.0, 0.0, 23.0 / 108.0, -976.0 / 135.0, 311.0 / 54.0, -19.0 / 60.0,
     17.0 / 6.0, -1.0 / 12.0},
    {2383.0 / 4100.0, 0.0, 0.0, -341.0 / 164.0, 4496.0 / 1025.0, -301.0 / 82.0,
     2133.0 / 4100.0, 45.0 / 82.0, 45.0 / 164.0, 18.0 / 41.0},
    {3.0 / 205.0, 0.0, 0.0, 0.0, 0.0, -6.0 / 41.0, -3.0 / 205.0, -3.0 / 41.0, 3.0 / 41.0,
     6.0 / 41.0, 0.0},
    {-1777.0 / 4100.0, 0.0, 0.0, -341.0 / 164.0, 4496.0 / 1025.0, -289.0 / 82.0,
     2193.0 / 4100.0, 51.0 / 82.0, 33.0 / 164.0, 12.0 / 41.0, 0.0, 1.0}};

// Eighth-order weights; the 7th-order weights differ only in stages 0, 10,
// 11, 12, so the error estimate collapses to 41/840 (k0 + k10 - k11 - k12).
constexpr double kB8[kStages] = {0.0, 0.0, 0.0, 0.0, 0.0,
                                 34.0 / 105.0, 9.0 / 35.0, 9.0 / 35.0,
                                 9.0 / 280.0, 9.0 / 280.0, 0.0,
                                 41.0 / 840.0, 41.0 / 840.0};
constexpr double kErrWeight = 41.0 / 840.0;

constexpr double kSafety = 0.9;
constexpr double kGrowClamp = 4.0;
constexpr double kShrinkClamp = 0.1;

} // namespace

void IntegratorConfig::validate() const {
  if (!(tol > 0.0)) throw InputError("integrator: tol must be positive");
  if (!(0.0 < hmin && hmin <= h0 && h0 <= hmax))
    throw InputError("integrator: need 0 < hmin <= h0 <= hmax");
  if (max_steps < 1) throw InputError("integrator: max_steps must be positive");
}

bool integrate_succeeded(IntegrateStatus s) {
  return s == IntegrateStatus::Done || s == IntegrateStatus::ObserverStop;
}

std::string to_string(IntegrateStatus s) {
  switch (s) {
    case IntegrateStatus::Done: return "done";
    case IntegrateStatus::ObserverStop: return "observer-stop";
    case IntegrateStatus::MaxSteps: return "max-steps";
    case IntegrateStatus::MinStep: return "min-step";
    case IntegrateStatus::FieldError: return "field-error";
  }
  return "unknown";
}

StepResult rk78_step(const OdeField& field, double t, const Vector& y, double h,
                     double tol, const Vector* f_start) {
  const Eigen::Index n = y.size();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> k(n, kStages);
  Vector work(n);

  auto eval_stage = [&](int s, const Vector& ys) {
    try {
      field(t + kC[s] * h, ys, work);
    } catch (Error& e) {
      std::ostringstream os;
      os << e.what() << " [stage " << s << " at t=" << t + kC[s] * h << "]";
      throw Error(os.str());
    }
    k.col(s) = work;
  };

  if (f_start)
    k.col(0) = *f_start;
  else
    eval_stage(0, y);

  Vector ys(n);
  for (int s = 1; s < kStages; ++s) {
    ys = y;
    for (int j = 0; j < s; ++j)
      if (kA[s][j] != 0.0) ys += (h * kA[s][j]) * k.col(j);
    eval_stage(s, ys);
  }

  StepResult out;
  out.y_next = y;
  for (int s = 0; s < kStages; ++s)
    if (kB8[s] != 0.0) out.y_next += (h * kB8[s]) * k.col(s);

  const Vector errvec =
      (h * kErrWeight) * (k.col(0) + k.col(10) - k.col(11) - k.col(12));
  double err = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    err = std::max(err, std::abs(errvec[i]) / (1.0 + std::abs(y[i])));
  out.error = err;

  double factor = kGrowClamp;
  if (err > 0.0)
    factor = std::clamp(kSafety * std::pow(tol / err, 1.0 / 8.0), kShrinkClamp, kGrowClamp);
  out.h_suggest = h * factor;
  return out;
}

Vector Trajectory::sample(double time) const {
  if (t.empty()) throw InputError("trajectory: empty");
  if (time <= t.front()) return y.front();
  if (time >= t.back()) return y.back();
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  const size_t i1 = static_cast<size_t>(it - t.begin());
  const size_t i0 = i1 - 1;
  const double h = t[i1] - t[i0];
  const double s = (time - t[i0]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * y[i0] + (h10 * h) * f[i0] + h01 * y[i1] + (h11 * h) * f[i1];
}

namespace {

struct DriverSink {
  // store == 0: keep first/last only; 1: every accepted step; 2: targets only
  int store = 1;
  Trajectory* traj = nullptr;
};

Trajectory run_integration(const OdeField& field, const Vector& y0, double t0, double t1,
                           const IntegratorConfig& cfg, const StepObserver* observer,
                           const std::vector<double>* targets, int store_mode) {
  cfg.validate();
  Trajectory traj;
  const double dir = (t1 >= t0) ? 1.0 : -1.0;

  double t = t0;
  Vector y = y0;
  Vector fy(y0.size());
  try {
    field(t, y, fy);
  } catch (Error& e) {
    traj.status = IntegrateStatus::FieldError;
    traj.message = e.what();
    traj.t.push_back(t);
    traj.y.push_back(y);
    traj.f.push_back(Vector::Zero(y.size()));
    return traj;
  }

  auto push = [&](double tt, const Vector& yy, const Vector& ff) {
    traj.t.push_back(tt);
    traj.y.push_back(yy);
    traj.f.push_back(ff);
  };
  push(t, y, fy);

  size_t next_target = 0;
  if (targets) {
    while (next_target < targets->size() && dir * ((*targets)[next_target] - t) <= 0.0)
      ++next_target;
  }

  double h = std::clamp(cfg.h0, cfg.hmin, cfg.hmax);
  long attempts = 0;
  while (dir * (t1 - t) > 0.0) {
    if (attempts++ >= cfg.max_steps) {
      traj.status = IntegrateStatus::MaxSteps;
      traj.message = "step budget exhausted";
      break;
    }
    double h_try = std::clamp(h, cfg.hmin, cfg.hmax);
    bool hit_target = false;
    const double to_end = dir * (t1 - t);
    if (h_try >= to_end) h_try = to_end;
    if (targets && next_target < targets->size()) {
      const double to_target = dir * ((*targets)[next_target] - t);
      if (h_try >= to_target) {
        h_try = to_target;
        hit_target = true;
      }
    }

    StepResult step;
    try {
      step = rk78_step(field, t, y, dir * h_try, cfg.tol, &fy);
    } catch (Error& e) {
      traj.status = IntegrateStatus::FieldError;
      traj.message = e.what();
      break;
    }

    if (step.error <= cfg.tol) {
      const double t_prev = t;
      const Vector y_prev = y;
      const Vector f_prev = fy;
      double t_new = t + dir * h_try;
      if (hit_target)
        t_new = (*targets)[next_target];
      else if (h_try == to_end)
        t_new = t1;
      t = t_new;
      y = step.y_next;
      try {
        field(t, y, fy);
      } catch (Error& e) {
        traj.status = IntegrateStatus::FieldError;
        traj.message = e.what();
        t = t_prev;
        y = y_prev;
        fy = f_prev;
        break;
      }
      ++traj.steps_accepted;
      if (store_mode == 1 || (store_mode == 2 && hit_target)) push(t, y, fy);
      if (hit_target) ++next_target;
      if (observer && !(*observer)(t_prev, y_prev, f_prev, t, y, fy)) {
        traj.status = IntegrateStatus::ObserverStop;
        break;
      }
      h = std::min(std::abs(step.h_suggest), cfg.hmax);
    } else {
      ++traj.steps_rejected;
      if (h_try <= cfg.hmin * (1.0 + 1e-12)) {
        traj.status = IntegrateStatus::MinStep;
        std::ostringstream os;
        os << "error " << step.error << " above tol at hmin near t=" << t;
        traj.message = os.str();
        break;
      }
      h = std::max(std::abs(step.h_suggest), cfg.hmin);
    }
  }

  if (traj.t.back() != t) push(t, y, fy);
  return traj;
}

} // namespace

Trajectory integrate(const OdeField& field, const Vector& y0, double t0, double t1,
                     const IntegratorConfig& cfg) {
  return run_integration(field, y0, t0, t1, cfg, nullptr, nullptr, 1);
}

Trajectory integrate(const OdeField& field, const Vector& y0, double t0, double t1,
                     const IntegratorConfig& cfg, const std::vector<double>& output_times) {
  return run_integration(field, y0, t0, t1, cfg, nullptr, &output_times, 2);
}

Trajectory integrate_observed(const OdeField& field, const Vector& y0, double t0, double t1,
                              const IntegratorConfig& cfg, const StepObserver& observer,
                              bool store) {
  return run_integration(field, y0, t0, t1, cfg, &observer, nullptr, store ? 1 : 0);
}

EventCrossing refine_crossing(const OdeField& field, double ta, const Vector& ya,
                              double ga, double tb, double gb, const EventFn& g,
                              const IntegratorConfig& cfg) {
  if (ga == 0.0) return {ta, ya, ga};
  if (ga * gb > 0.0) throw InputError("refine_crossing: no sign change in bracket");

  constexpr int kMaxBisect = 128;
  constexpr double kGTol = 1e-12;
  IntegratorConfig sub = cfg;

  double lo = ta, hi = tb;
  Vector ylo = ya;
  double glo = ga;
  for (int it = 0; it < kMaxBisect; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= std::min(lo, hi) || mid >= std::max(lo, hi))
      return {lo, ylo, glo}; // bracket at floating-point resolution
    sub.hmin = std::min(cfg.hmin, std::abs(mid - lo) * 0.25 + 1e-300);
    sub.h0 = std::clamp(std::abs(mid - lo), sub.hmin, sub.hmax);
    Trajectory piece = run_integration(field, ylo, lo, mid, sub, nullptr, nullptr, 0);
    if (!piece.ok()) throw ConvergenceError("refine_crossing: substep failed: " + piece.message);
    const Vector ym = piece.y.back();
    const double gm = g(mid, ym);
    if (std::abs(gm) < kGTol) return {mid, ym, gm};
    if (glo * gm < 0.0) {
      hi = mid;
    } else {
      lo = mid;
      ylo = ym;
      glo = gm;
    }
  }
  throw ConvergenceError("refine_crossing: no convergence after 128 bisections");
}

std::vector<EventCrossing> find_event(const OdeField& field, const Trajectory& traj,
                                      const EventFn& g, int direction,
                                      const IntegratorConfig& cfg) {
  std::vector<EventCrossing> out;
  if (traj.size() < 2) return out;
  double ga = g(traj.t[0], traj.y[0]);
  for (size_t i = 1; i < traj.size(); ++i) {
    const double gb = g(traj.t[i], traj.y[i]);
    const bool up = ga < 0.0 && gb >= 0.0;
    const bool down = ga > 0.0 && gb <= 0.0;
    const bool wanted = (direction > 0 && up) || (direction < 0 && down) ||
                        (direction == 0 && (up || down));
    if (wanted)
      out.push_back(refine_crossing(field, traj.t[i - 1], traj.y[i - 1], ga, traj.t[i], gb, g, cfg));
    ga = gb;
  }
  return out;
}

} // namespace splinelab
