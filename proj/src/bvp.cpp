#include "splinelab/bvp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

#include "splinelab/rng.hpp"
#include "splinelab/sphere.hpp"

namespace splinelab {

namespace {

// Residual evaluation: nullopt marks an invalid sample (failed integration),
// which the damped solver treats like a rejected step.
using ResidualFn = std::function<std::optional<Vector>(const Vector&)>;

struct SolveOutcome {
  bool converged = false;
  Vector w;
  double mismatch = std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::string failure;
};

SolveOutcome damped_least_squares(const ResidualFn& F, Vector w, double tol, int max_iter,
                                  double fd_step) {
  SolveOutcome out;
  out.w = w;
  auto res = F(w);
  if (!res) {
    out.failure = "initial residual evaluation failed";
    return out;
  }
  Vector r = *res;
  double lambda = 1e-3;

  for (int iter = 0; iter < max_iter; ++iter) {
    out.iterations = iter;
    out.mismatch = r.cwiseAbs().maxCoeff();
    out.w = w;
    if (out.mismatch < tol) {
      out.converged = true;
      return out;
    }

    const Eigen::Index m = w.size(), k = r.size();
    Matrix J(k, m);
    bool jac_ok = true;
    for (Eigen::Index j = 0; j < m && jac_ok; ++j) {
      const double h = fd_step * (1.0 + std::abs(w[j]));
      Vector wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      const auto rp = F(wp);
      const auto rm = F(wm);
      if (rp && rm) {
        J.col(j) = (*rp - *rm) / (2.0 * h);
      } else if (rp) {
        J.col(j) = (*rp - r) / h;
      } else if (rm) {
        J.col(j) = (r - *rm) / h;
      } else {
        jac_ok = false;
      }
    }
    if (!jac_ok) {
      out.failure = "Jacobian evaluation failed";
      return out;
    }

    const Matrix JtJ = J.transpose() * J;
    const Vector g = J.transpose() * r;
    bool accepted = false;
    for (int inner = 0; inner < 12; ++inner) {
      Matrix A = JtJ;
      for (Eigen::Index d = 0; d < m; ++d)
        A(d, d) += lambda * std::max(JtJ(d, d), 1e-12);
      const Vector delta = A.ldlt().solve(-g);
      const Vector w_try = w + delta;
      const auto r_try = F(w_try);
      if (r_try && r_try->squaredNorm() < r.squaredNorm()) {
        w = w_try;
        r = *r_try;
        lambda = std::max(lambda / 3.0, 1e-14);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      out.mismatch = r.cwiseAbs().maxCoeff();
      out.w = w;
      out.failure = "damping stalled";
      return out;
    }
  }
  const auto r_final = F(w);
  out.w = w;
  if (r_final) {
    out.mismatch = r_final->cwiseAbs().maxCoeff();
    if (out.mismatch < tol) out.converged = true;
  }
  out.iterations = max_iter;
  if (!out.converged) out.failure = "iteration budget exhausted";
  return out;
}

// Shared multistart driver. `starts` supplies the initial unknown vector per
// index; distinct converged solutions are collected and ranked by cost.
struct MultistartProblem {
  ResidualFn residual;
  std::function<Vector(int)> start;
  std::function<double(const Vector&)> cost; // of a converged unknown vector
  int n_starts = 16;
  int threads = 1;
};

struct StartRecord {
  SolveOutcome outcome;
  double cost = 0.0;
  int index = -1;
};

std::vector<StartRecord> run_multistart(const MultistartProblem& prob, const ShootOptions& opts) {
  std::vector<StartRecord> records(static_cast<size_t>(prob.n_starts));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= prob.n_starts) return;
      StartRecord rec;
      rec.index = i;
      rec.outcome = damped_least_squares(prob.residual, prob.start(i), opts.mismatch_tol,
                                         opts.max_iterations, opts.fd_step);
      if (rec.outcome.converged) rec.cost = prob.cost(rec.outcome.w);
      records[static_cast<size_t>(i)] = std::move(rec);
    }
  };
  const int nthreads = std::max(1, std::min(opts.threads, prob.n_starts));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(nthreads));
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return records;
}

bool nearly_same(const Vector& a, const Vector& b) {
  return (a - b).cwiseAbs().maxCoeff() < 1e-6 * (1.0 + a.cwiseAbs().maxCoeff());
}

// Merge converged starts into the result: best = converged with lowest cost
// (ties by start index); otherwise the start with the smallest mismatch.
void finalize_result(ShootingResult& result, const std::vector<StartRecord>& records,
                     const std::function<void(ShootingResult&, const Vector&)>& unpack_best) {
  const StartRecord* best = nullptr;
  for (const auto& rec : records) {
    if (rec.outcome.converged) {
      if (!best || !best->outcome.converged || rec.cost < best->cost) best = &rec;
    } else if (!best || (!best->outcome.converged && rec.outcome.mismatch < best->outcome.mismatch)) {
      best = &rec;
    }
  }
  if (!best) {
    result.failure = "no starts";
    return;
  }
  std::vector<const StartRecord*> winners;
  for (const auto& rec : records) {
    if (!rec.outcome.converged) continue;
    bool dup = false;
    for (const auto* w : winners)
      if (nearly_same(w->outcome.w, rec.outcome.w)) dup = true;
    if (!dup) winners.push_back(&rec);
  }
  std::sort(winners.begin(), winners.end(), [](const StartRecord* a, const StartRecord* b) {
    if (a->cost != b->cost) return a->cost < b->cost;
    return a->index < b->index;
  });

  result.converged = best->outcome.converged;
  result.mismatch = best->outcome.mismatch;
  result.iterations = best->outcome.iterations;
  result.start_index = best->index;
  if (result.converged) {
    const StartRecord* top = winners.front();
    result.mismatch = top->outcome.mismatch;
    result.iterations = top->outcome.iterations;
    result.start_index = top->index;
    result.cost = top->cost;
    unpack_best(result, top->outcome.w);
    for (const auto* w : winners) {
      ShootingResult scratch;
      unpack_best(scratch, w->outcome.w);
      Extremal e;
      e.p0 = scratch.p0;
      e.alpha0 = scratch.alpha0;
      e.T = scratch.T;
      e.cost = w->cost;
      e.mismatch = w->outcome.mismatch;
      e.start_index = w->index;
      result.extremals.push_back(e);
    }
  } else {
    unpack_best(result, best->outcome.w);
    result.failure = best->outcome.failure.empty() ? "did not converge" : best->outcome.failure;
  }
}

Trajectory integrate_final(const OdeField& field, const Vector& y0, double T,
                           const IntegratorConfig& icfg) {
  return integrate(field, y0, 0.0, T, icfg);
}

double trapezoid_cost(const Trajectory& traj, const std::function<double(const Vector&)>& density) {
  double acc = 0.0;
  for (size_t i = 1; i < traj.size(); ++i)
    acc += 0.5 * (traj.t[i] - traj.t[i - 1]) * (density(traj.y[i]) + density(traj.y[i - 1]));
  return acc;
}

} // namespace

Vector shooting_residual(const ChartGeometry& geom, const CostModel& cost,
                         const BoundaryData& bd, const Vector& p0, const Vector& alpha0,
                         const IntegratorConfig& icfg) {
  const int n = geom.dim();
  geom.require_valid(bd.q0);
  geom.require_valid(bd.q1);
  if (!(bd.T > 0.0)) throw InputError("shooting_residual: T must be positive");
  const OdeField field = split_ode_field(geom, cost);
  SplitState s0{bd.q0, bd.v0, p0, alpha0};
  const auto noop = [](double, const Vector&, const Vector&, double, const Vector&,
                       const Vector&) { return true; };
  Trajectory traj = integrate_observed(field, pack_split(s0), 0.0, bd.T, icfg, noop);
  if (!traj.ok()) throw Error("shooting residual: integration failed: " + traj.message);
  const SplitState sT = unpack_split(traj.y.back(), n);
  Vector res(2 * n);
  res << sT.x - bd.q1, sT.v - bd.v1;
  return res;
}

ShootingResult shoot(const ChartGeometry& geom, const CostModel& cost, const BoundaryData& bd,
                     const ShootOptions& opts, const IntegratorConfig& icfg,
                     const std::optional<std::pair<Vector, Vector>>& guess) {
  const int n = geom.dim();
  ShootingResult result;
  result.T = bd.T;
  const OdeField field = split_ode_field(geom, cost);

  const ResidualFn F = [&](const Vector& w) -> std::optional<Vector> {
    try {
      return shooting_residual(geom, cost, bd, w.head(n), w.tail(n), icfg);
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  // Coordinate-cubic heuristic for the base start; the flat case is exact.
  const double T = bd.T;
  const Vector dq = bd.q1 - bd.q0;
  const Vector c2 = 3.0 * dq / (T * T) - (2.0 * bd.v0 + bd.v1) / T;
  const Vector c3 = -2.0 * dq / (T * T * T) + (bd.v0 + bd.v1) / (T * T);
  const Matrix g0 = geom.metric(bd.q0);
  const double beta = cost.is_cubic() ? cost.beta : 1.0;
  Vector alpha_base = beta * (g0 * (2.0 * c2));
  Vector p_base = -beta * (g0 * (6.0 * c3));
  const double radius = (bd.v1 - bd.v0).norm() / T + dq.norm() / (T * T) + 1e-3;

  const auto start = [&, alpha_base, p_base](int i) {
    Vector w(2 * n);
    w << p_base, alpha_base;
    if (i == 0) {
      if (guess) w << guess->first, guess->second;
      return w;
    }
    SplitMix64 rng(opts.rng_seed + static_cast<std::uint64_t>(i) * 0x9E37ULL);
    const double scale = beta * radius * (0.25 + 2.0 * i / std::max(1, opts.multistart));
    for (int j = 0; j < n; ++j) {
      w[j] += scale / T * rng.uniform(-1.0, 1.0);
      w[n + j] += scale * rng.uniform(-1.0, 1.0);
    }
    return w;
  };

  const auto cost_of = [&](const Vector& w) {
    SplitState s0{bd.q0, bd.v0, w.head(n), w.tail(n)};
    Trajectory traj = integrate_final(field, pack_split(s0), T, icfg);
    if (cost.is_cubic()) {
      return trapezoid_cost(traj, [&](const Vector& y) {
        const SplitState s = unpack_split(y, n);
        return s.alpha.dot(geom.cometric(s.x) * s.alpha) / (2.0 * cost.beta);
      });
    }
    return T;
  };

  MultistartProblem prob{F, start, cost_of, opts.multistart, opts.threads};
  finalize_result(result, run_multistart(prob, opts),
                  [&](ShootingResult& res, const Vector& w) {
                    res.p0 = w.head(n);
                    res.alpha0 = w.tail(n);
                  });
  if (result.converged) {
    SplitState s0{bd.q0, bd.v0, result.p0, result.alpha0};
    result.trajectory = integrate_final(field, pack_split(s0), T, icfg);
    for (auto& e : result.extremals) e.T = T;
  }
  return result;
}

ShootingResult shoot_sphere_extrinsic(double radius, double beta, const SphereBoundary& bd,
                                      const ShootOptions& opts, const IntegratorConfig& icfg,
                                      const std::optional<std::pair<Vector3, Vector3>>& guess) {
  if (!(radius > 0.0) || !(beta > 0.0))
    throw InputError("shoot_sphere_extrinsic: radius and beta must be positive");
  if (!(bd.T > 0.0)) throw InputError("shoot_sphere_extrinsic: T must be positive");
  ShootingResult result;
  result.T = bd.T;

  // Clean the boundary data onto the constraint manifold.
  auto on_sphere = [&](const Vector3& q) -> Vector3 {
    if (std::abs(q.norm() - radius) > 1e-6)
      throw InputError("shoot_sphere_extrinsic: boundary point is not on the sphere");
    return radius * q.normalized();
  };
  auto tangent_at = [&](const Vector3& q, const Vector3& v) -> Vector3 {
    return v - (v.dot(q) / (radius * radius)) * q;
  };
  const Vector3 q0 = on_sphere(bd.q0), q1 = on_sphere(bd.q1);
  const Vector3 v0 = tangent_at(q0, bd.v0), v1 = tangent_at(q1, bd.v1);

  // Orthonormal tangent basis at q0 for the costate unknowns.
  const Vector3 n0 = q0 / radius;
  Vector3 t1 = v0;
  if (t1.norm() < 1e-12) t1 = n0.unitOrthogonal();
  t1 = tangent_at(q0, t1).normalized();
  const Vector3 t2 = n0.cross(t1);

  const OdeField field = crouch_leite_ode_field(beta, radius);
  const double T = bd.T;

  const auto residual_of = [&](const Vector& w) -> std::optional<Vector> {
    ExtrinsicSphereState s0;
    s0.radius = radius;
    s0.x0 = q0;
    s0.x1 = v0;
    s0.x2 = w[2] * t1 + w[3] * t2;      // alpha
    s0.x3 = -(w[0] * t1 + w[1] * t2);   // -p
    const auto noop = [](double, const Vector&, const Vector&, double, const Vector&,
                         const Vector&) { return true; };
    Trajectory traj = integrate_observed(field, pack_extrinsic(s0), 0.0, T, icfg, noop);
    if (!traj.ok()) return std::nullopt;
    const ExtrinsicSphereState sT = unpack_extrinsic(traj.y.back(), radius);
    Vector res(6);
    res << sT.x0 - Vector(q1), sT.x1 - Vector(v1);
    return res;
  };

  // Ambient chord cubic as the base start.
  const Vector3 dq = q1 - q0;
  const Vector3 c2 = 3.0 * dq / (T * T) - (2.0 * v0 + v1) / T;
  const Vector3 c3 = -2.0 * dq / (T * T * T) + (v0 + v1) / (T * T);
  const Vector3 alpha_base = beta * tangent_at(q0, 2.0 * c2);
  const Vector3 p_base = -beta * tangent_at(q0, 6.0 * c3);
  const double ball = (v1 - v0).norm() / T + dq.norm() / (T * T) + 1e-3;

  const auto start = [&](int i) {
    Vector w(4);
    w << p_base.dot(t1), p_base.dot(t2), alpha_base.dot(t1), alpha_base.dot(t2);
    if (i == 0) {
      if (guess)
        w << guess->first.dot(t1), guess->first.dot(t2), guess->second.dot(t1),
            guess->second.dot(t2);
      return w;
    }
    SplitMix64 rng(opts.rng_seed + 0xABCDULL + static_cast<std::uint64_t>(i) * 0x9E37ULL);
    const double scale = beta * ball * (0.25 + 2.0 * i / std::max(1, opts.multistart));
    w[0] += scale / T * rng.uniform(-1.0, 1.0);
    w[1] += scale / T * rng.uniform(-1.0, 1.0);
    w[2] += scale * rng.uniform(-1.0, 1.0);
    w[3] += scale * rng.uniform(-1.0, 1.0);
    return w;
  };

  const auto pack_initial = [&](const Vector& w) {
    ExtrinsicSphereState s0;
    s0.radius = radius;
    s0.x0 = q0;
    s0.x1 = v0;
    s0.x2 = w[2] * t1 + w[3] * t2;
    s0.x3 = -(w[0] * t1 + w[1] * t2);
    return s0;
  };

  const auto cost_of = [&](const Vector& w) {
    Trajectory traj = integrate_final(field, pack_extrinsic(pack_initial(w)), T, icfg);
    return trapezoid_cost(traj, [&](const Vector& y) {
      // |u|^2 beta/2 with u = x2/beta.
      return y.segment(6, 3).squaredNorm() / (2.0 * beta);
    });
  };

  MultistartProblem prob{residual_of, start, cost_of, opts.multistart, opts.threads};
  finalize_result(result, run_multistart(prob, opts),
                  [&](ShootingResult& res, const Vector& w) {
                    res.p0 = Vector(w[0] * t1 + w[1] * t2);
                    res.alpha0 = Vector(w[2] * t1 + w[3] * t2);
                  });
  if (result.converged) {
    Vector w(4);
    w << result.p0.dot(Vector(t1)), result.p0.dot(Vector(t2)),
        result.alpha0.dot(Vector(t1)), result.alpha0.dot(Vector(t2));
    result.trajectory = integrate_final(field, pack_extrinsic(pack_initial(w)), T, icfg);
    for (auto& e : result.extremals) e.T = T;
  }
  return result;
}

namespace {

// In one dimension the time-minimal control u = A alpha-sharp/|alpha-sharp|
// flips sign wherever alpha crosses zero, and the embedded error estimate is
// blind to a switch inside a step (the +-A stage values cancel pairwise).
// Integrate arc by arc instead: locate the switch (coarse bisection, then
// secant polish on the smooth alpha(t)) and hop across the singular band
// with a linearized advance on the far side.
Trajectory integrate_tmin_switched_1d(const ChartGeometry& geom, const CostModel& cost,
                                      const Vector& y0, double T,
                                      const IntegratorConfig& icfg, bool store) {
  const OdeField field = split_ode_field(geom, cost);
  Trajectory out;
  double t = 0.0;
  Vector y = y0;
  constexpr int kMaxArcs = 16;

  auto push = [&](double tt, const Vector& yy, const Vector& ff) {
    if (!out.t.empty() && out.t.back() == tt) return;
    out.t.push_back(tt);
    out.y.push_back(yy);
    out.f.push_back(ff);
  };
  auto fail = [&](const std::string& msg) {
    out.status = IntegrateStatus::FieldError;
    out.message = msg;
    return out;
  };
  // short forward flow used by the localization
  auto flow = [&](const Vector& from, double ta, double tb) {
    return integrate_observed(field, from, ta, tb, icfg,
                              [](double, const Vector&, const Vector&, double, const Vector&,
                                 const Vector&) { return true; });
  };

  for (int arc = 0; arc < kMaxArcs; ++arc) {
    const StepObserver watch = [&](double, const Vector& yp, const Vector&, double,
                                   const Vector& yn, const Vector&) {
      return yp[3] * yn[3] > 0.0; // stop once alpha changes sign across a step
    };
    Trajectory leg = integrate_observed(field, y, t, T, icfg, watch, true);
    out.status = leg.status;
    out.message = leg.message;
    const bool switched = leg.status == IntegrateStatus::ObserverStop;
    // The straddling step was produced across the control jump, where the
    // embedded estimate is unreliable; drop it and re-enter at the switch.
    const size_t keep = leg.size() - (switched ? 1 : 0);
    if (store)
      for (size_t i = 0; i < keep; ++i) push(leg.t[i], leg.y[i], leg.f[i]);
    else if (keep > 0)
      push(leg.t[keep - 1], leg.y[keep - 1], leg.f[keep - 1]);
    if (!switched) return out;

    double lo = leg.t[leg.size() - 2];
    Vector ylo = leg.y[leg.size() - 2];
    double hi = leg.t.back();
    double alpha_hi = leg.y.back()[3]; // contaminated but sign-correct
    // a probe integration whose endpoint lands inside the refusal band can
    // itself throw; shift the probe point and retry once
    auto try_flow = [&](const Vector& from, double ta, double tb,
                        double tb_alt) -> std::optional<Trajectory> {
      Trajectory piece = flow(from, ta, tb);
      if (piece.ok()) return piece;
      if (piece.message.find("singular") != std::string::npos && tb_alt > ta) {
        piece = flow(from, ta, tb_alt);
        if (piece.ok()) return piece;
      }
      out.status = piece.status;
      out.message = piece.message;
      return std::nullopt;
    };
    const double coarse = 1e-5 * (1.0 + std::abs(hi));
    for (int it = 0; it < 40 && hi - lo > coarse; ++it) {
      const double mid = 0.5 * (lo + hi);
      const auto piece = try_flow(ylo, lo, mid, lo + 0.61 * (hi - lo));
      if (!piece) return out;
      const double reached = piece->t.back();
      if (ylo[3] * piece->y.back()[3] > 0.0) {
        lo = reached;
        ylo = piece->y.back();
      } else {
        hi = reached;
        alpha_hi = piece->y.back()[3];
      }
    }
    // Secant aims for |alpha| = kAlphaSafe on the near side rather than the
    // zero itself, keeping all integrations clear of the refusal band; the
    // hop below crosses the remainder analytically.
    constexpr double kAlphaSafe = 1e-8;
    double t_hat = lo;
    Vector y_hat = ylo;
    for (int it = 0; it < 8 && std::abs(y_hat[3]) > 4.0 * kAlphaSafe; ++it) {
      const double slope = (alpha_hi - y_hat[3]) / (hi - t_hat);
      if (!(std::abs(slope) > 0.0)) break;
      const double t_zero = t_hat - y_hat[3] / slope;
      const double t_aim = t_zero - kAlphaSafe / std::abs(slope);
      if (!(t_aim > t_hat) || !(t_aim < hi)) break;
      const auto piece = try_flow(y_hat, t_hat, t_aim, 0.5 * (t_hat + t_aim));
      if (!piece) return out;
      const Vector y_new = piece->y.back();
      if (y_hat[3] * y_new[3] > 0.0) {
        t_hat = piece->t.back();
        y_hat = y_new;
      } else {
        hi = piece->t.back();
        alpha_hi = y_new[3];
      }
    }

    const double p_hat = y_hat[2];
    const double s_near = ylo[3] > 0.0 ? 1.0 : -1.0;
    if (std::abs(p_hat) < 1e-4)
      return fail("singular control: costate too flat to leave the switch band");
    // linearized advance across the band: near side for |alpha|/|p|, then a
    // margin on the far side that clears the refusal guard
    const double dt_near = std::abs(y_hat[3]) / std::abs(p_hat);
    const double margin = 2e-9 / std::abs(p_hat);
    const double dt_total = dt_near + margin;
    SplitState synth = unpack_split(y_hat, 1);
    synth.alpha[0] = -s_near; // far-side direction; only the sign matters
    Vector f_far(4);
    try {
      f_far = pack_split(split_field(geom, cost, synth));
    } catch (const Error& e) {
      return fail(e.what());
    }
    Vector y_resume = y_hat + dt_total * f_far;
    y_resume[3] = y_hat[3] - p_hat * dt_total;
    if (y_resume[3] * s_near >= 0.0 || std::abs(y_resume[3]) < 1e-9)
      return fail("singular control: could not clear the switch band");
    push(t_hat, y_hat, f_far);
    t = t_hat + dt_total;
    y = y_resume;
    if (t >= T) {
      out.status = IntegrateStatus::Done;
      push(t, y, f_far);
      return out;
    }
  }
  return fail("too many control switches");
}

} // namespace

ShootingResult tmin_shoot(const ChartGeometry& geom, double bound, const BoundaryData& bd,
                          const ShootOptions& opts, const IntegratorConfig& icfg,
                          const std::optional<Vector>& guess) {
  const int n = geom.dim();
  ShootingResult result;
  const CostModel cost = CostModel::time_minimal(bound);
  const OdeField field = split_ode_field(geom, cost);

  std::atomic<bool> singular_seen{false};

  const auto flow_to = [&](const Vector& y0, double T, bool store) {
    if (n == 1) return integrate_tmin_switched_1d(geom, cost, y0, T, icfg, store);
    const auto noop = [](double, const Vector&, const Vector&, double, const Vector&,
                         const Vector&) { return true; };
    return integrate_observed(field, y0, 0.0, T, icfg, noop, store);
  };

  const ResidualFn F = [&](const Vector& w) -> std::optional<Vector> {
    const double T = w[2 * n];
    if (!(T > 1e-8) || T > 1e6) return std::nullopt;
    SplitState s0{bd.q0, bd.v0, w.head(n), w.segment(n, n)};
    double H0;
    try {
      H0 = optimal_hamiltonian(geom, cost, s0);
    } catch (const Error&) {
      return std::nullopt;
    }
    Trajectory traj = flow_to(pack_split(s0), T, false);
    if (!traj.ok()) {
      if (traj.message.find("singular") != std::string::npos) singular_seen = true;
      return std::nullopt;
    }
    const SplitState sT = unpack_split(traj.y.back(), n);
    Vector res(2 * n + 1);
    res << sT.x - bd.q1, sT.v - bd.v1, H0;
    return res;
  };

  // Start heuristics: flat one-switch analysis gives |alpha0| = 1/A and
  // p0 ~ 2 alpha0 / T.
  const Vector dq = bd.q1 - bd.q0;
  const double dist = dq.norm();
  const double T_guess = (bd.T > 0.0)
                             ? bd.T
                             : 2.0 * std::sqrt((dist + 0.1) / bound) +
                                   (bd.v0.norm() + bd.v1.norm()) / bound;
  Vector dir = dq;
  if (dir.norm() < 1e-12) dir = bd.v1 - bd.v0;
  if (dir.norm() < 1e-12) dir = Vector::Ones(n);
  dir.normalize();
  const Vector alpha_base = lower(geom, bd.q0, dir) / bound;
  const Vector p_base = 2.0 * alpha_base / T_guess;

  const auto start = [&](int i) {
    Vector w(2 * n + 1);
    w << p_base, alpha_base, T_guess;
    if (i == 0) {
      if (guess && guess->size() == 2 * n + 1) w = *guess;
      return w;
    }
    SplitMix64 rng(opts.rng_seed + 0x7711ULL + static_cast<std::uint64_t>(i) * 0x9E37ULL);
    const double scale = (0.3 + 2.0 * i / std::max(1, opts.multistart)) / bound;
    for (int j = 0; j < n; ++j) {
      w[j] += scale / T_guess * rng.uniform(-1.0, 1.0);
      w[n + j] += scale * rng.uniform(-1.0, 1.0);
    }
    w[2 * n] = T_guess * rng.uniform(0.5, 2.0);
    return w;
  };

  const auto cost_of = [&](const Vector& w) { return w[2 * n]; };

  MultistartProblem prob{F, start, cost_of, opts.multistart, opts.threads};
  finalize_result(result, run_multistart(prob, opts),
                  [&](ShootingResult& res, const Vector& w) {
                    res.p0 = w.head(n);
                    res.alpha0 = w.segment(n, n);
                    res.T = w[2 * n];
                  });
  if (result.converged) {
    SplitState s0{bd.q0, bd.v0, result.p0, result.alpha0};
    result.trajectory = flow_to(pack_split(s0), result.T, true);
  } else if (singular_seen) {
    result.failure = "singular-control abort: " + result.failure;
  }
  return result;
}

} // namespace splinelab
