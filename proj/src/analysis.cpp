#include "splinelab/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace splinelab {

int SectionPointSet::escapes() const {
  int n = 0;
  for (const auto& s : seeds) n += s.escaped ? 1 : 0;
  return n;
}

int SectionPointSet::confined() const {
  int n = 0;
  for (const auto& s : seeds)
    n += (!s.escaped && !s.infeasible && !s.aborted) ? 1 : 0;
  return n;
}

std::optional<double> seed_on_section(double h, double mu, double beta, double r,
                                      double v, double z) {
  if (!(v > 0.0)) throw InputError("seed_on_section: v must be positive");
  if (std::abs(z) > 1.0) throw InputError("seed_on_section: |z| > 1");
  const double radicand =
      2.0 * beta * (h - mu * mu * (1.0 - z * z) / (2.0 * beta * v * v) - mu * z * v / r);
  // tolerate roundoff at the boundary (e.g. seeding exactly on an equilibrium)
  if (radicand < -1e-12 * (1.0 + std::abs(h))) return std::nullopt;
  return std::sqrt(std::max(0.0, radicand));
}

namespace {

struct SeedRun {
  std::vector<SectionPoint> points;
  SeedOutcome outcome;
};

SeedRun run_seed(const SectionSpec& spec, int seed_id) {
  SeedRun run;
  SeedOutcome& oc = run.outcome;
  oc.seed_id = seed_id;
  oc.v_seed = spec.seeds[static_cast<size_t>(seed_id)].first;
  oc.z_seed = spec.seeds[static_cast<size_t>(seed_id)].second;

  const auto a0 = seed_on_section(spec.h, spec.mu, spec.beta, spec.r, oc.v_seed, oc.z_seed);
  if (!a0) {
    oc.infeasible = true;
    oc.note = "negative radicand";
    return run;
  }
  oc.a_seed = *a0;

  const SphericalParams prm{spec.beta, spec.r, spec.mu};
  const OdeField field = reduced_spherical_ode_field(prm);
  const EventFn section = [](double, const Vector& y) {
    return std::remainder(y[2] - M_PI / 2.0, 2.0 * M_PI);
  };
  const double v_max = spec.v_max_factor * spec.r;

  auto record = [&](double t, const Vector& y, int index) {
    const SphericalState s(y[0], y[1], y[2], y[3]);
    SectionPoint p;
    p.seed_id = seed_id;
    p.crossing_index = index;
    p.t = t;
    p.v = y[0];
    p.a = y[1];
    p.z = y[3];
    p.h_check = std::abs(reduced_hamiltonian_spherical(s, prm) - spec.h);
    p.casimir_check = momentum_from_angles(spec.mu, y[2], std::clamp(y[3], -1.0, 1.0)).norm();
    if (p.h_check >= kSectionEnergyTol || std::abs(p.z) > 1.0) {
      oc.note = "dropped a crossing outside tolerance";
      return;
    }
    run.points.push_back(p);
  };

  Vector y0(4);
  y0 << oc.v_seed, oc.a_seed, M_PI / 2.0, oc.z_seed;
  record(0.0, y0, 0);

  // One leg per crossing, restarting from the refined crossing state with
  // theta wrapped back near pi/2. Keeping theta bounded stops the mixed
  // error norm from loosening as the angle winds up, which would otherwise
  // leak into the energy check on long runs. Each leg starts on (or within
  // roundoff of) the section, so detection stays disarmed until the flow has
  // genuinely left it; without this the restart re-detects its own crossing.
  constexpr double kArmMargin = 1e-6;
  int found = 0;
  double t = 0.0;
  Vector y = y0;
  while (found < spec.crossings_per_seed && t < spec.max_time) {
    std::optional<EventCrossing> crossing;
    bool armed = false;
    const StepObserver observer = [&](double tp, const Vector& yp, const Vector&, double tn,
                                      const Vector& yn, const Vector&) {
      if (yn[0] > v_max) {
        oc.escaped = true;
        return false;
      }
      const double ga = section(tp, yp);
      const double gb = section(tn, yn);
      if (!armed) {
        const bool away = (spec.direction > 0 && gb < -kArmMargin) ||
                          (spec.direction < 0 && gb > kArmMargin) ||
                          (spec.direction == 0 && std::abs(gb) > kArmMargin);
        if (away) armed = true;
        return true;
      }
      // Exclude the 2*pi wrap jump of the section function.
      if (std::abs(ga) < M_PI / 2.0 && std::abs(gb) < M_PI / 2.0 && ga != 0.0) {
        const bool up = ga < 0.0 && gb >= 0.0;
        const bool down = ga > 0.0 && gb <= 0.0;
        const bool wanted = (spec.direction > 0 && up) || (spec.direction < 0 && down) ||
                            (spec.direction == 0 && (up || down));
        if (wanted) {
          crossing = refine_crossing(field, tp, yp, ga, tn, gb, section, spec.integrator);
          return false;
        }
      }
      return true;
    };

    Trajectory leg;
    try {
      leg = integrate_observed(field, y, t, spec.max_time, spec.integrator, observer);
    } catch (const Error& e) {
      oc.aborted = true;
      oc.note = e.what();
      break;
    }
    oc.end_time = leg.t.back();
    if (crossing) {
      ++found;
      record(crossing->t, crossing->y, found);
      t = crossing->t;
      y = crossing->y;
      y[2] = M_PI / 2.0 + std::remainder(y[2] - M_PI / 2.0, 2.0 * M_PI);
      y[3] = std::clamp(y[3], -1.0, 1.0);
      continue;
    }
    if (oc.escaped) break;
    if (leg.status == IntegrateStatus::Done) {
      oc.time_capped = true;
    } else if (leg.message.find("v =") != std::string::npos ||
               leg.message.find("|v|") != std::string::npos) {
      // reaching the v -> 0 region counts as leaving the section's regime
      oc.escaped = true;
      oc.note = "velocity singularity: " + leg.message;
    } else {
      oc.aborted = true;
      oc.note = leg.message;
    }
    break;
  }
  oc.crossings = found;
  return run;
}

} // namespace

SectionPointSet poincare_section(const SectionSpec& spec) {
  if (spec.seeds.empty()) throw InputError("poincare_section: no seeds");
  bool any_feasible = false;
  for (const auto& [v, z] : spec.seeds)
    if (seed_on_section(spec.h, spec.mu, spec.beta, spec.r, v, z)) any_feasible = true;
  if (!any_feasible)
    throw InputError("poincare_section: the energy level is unattainable for every seed");
  SectionPointSet out;
  const int n = static_cast<int>(spec.seeds.size());
  std::vector<SeedRun> runs(static_cast<size_t>(n));

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      runs[static_cast<size_t>(i)] = run_seed(spec, i);
    }
  };
  const int nthreads = std::max(1, std::min(spec.threads, n));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (auto& run : runs) {
    out.seeds.push_back(run.outcome);
    out.points.insert(out.points.end(), run.points.begin(), run.points.end());
  }
  return out;
}

std::vector<DriftEntry> conserved_audit(const Trajectory& traj,
                                        const std::vector<NamedQuantity>& quantities) {
  if (traj.size() == 0) throw InputError("conserved_audit: empty trajectory");
  std::vector<DriftEntry> out;
  out.reserve(quantities.size());
  for (const auto& [name, fn] : quantities) {
    DriftEntry e;
    e.name = name;
    e.initial = fn(traj.t.front(), traj.y.front());
    for (size_t i = 1; i < traj.size(); ++i) {
      const double q = fn(traj.t[i], traj.y[i]);
      e.max_abs_drift = std::max(e.max_abs_drift, std::abs(q - e.initial));
    }
    e.max_rel_drift = e.max_abs_drift / (1.0 + std::abs(e.initial));
    out.push_back(std::move(e));
  }
  return out;
}

CurveStat curve_thinness(const std::vector<Vector3>& points, int harmonics) {
  CurveStat stat;
  const size_t n = points.size();
  if (n < 8) return stat;

  Vector3 mean = Vector3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(n);

  Vector3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Vector3 scale = 0.5 * (hi - lo);
  for (int i = 0; i < 3; ++i) scale[i] = std::max(scale[i], 1e-12);

  std::vector<Vector3> q(n);
  for (size_t i = 0; i < n; ++i) q[i] = (points[i] - mean).cwiseQuotient(scale);

  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      stat.diameter = std::max(stat.diameter, (q[i] - q[j]).norm());
  if (stat.diameter < 1e-9) return stat;

  Matrix3 cov = Matrix3::Zero();
  for (const auto& p : q) cov += p * p.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix3> es(cov);
  const Vector3 e1 = es.eigenvectors().col(2);
  const Vector3 e2 = es.eigenvectors().col(1);

  const int K = std::min<int>(harmonics, (static_cast<int>(n) - 2) / 4);
  if (K < 1) return stat;
  Matrix design(n, 2 * K + 1);
  Vector radius(n);
  for (size_t i = 0; i < n; ++i) {
    const double phi = std::atan2(q[i].dot(e2), q[i].dot(e1));
    radius[static_cast<Eigen::Index>(i)] = q[i].norm();
    design(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (int m = 1; m <= K; ++m) {
      design(static_cast<Eigen::Index>(i), 2 * m - 1) = std::cos(m * phi);
      design(static_cast<Eigen::Index>(i), 2 * m) = std::sin(m * phi);
    }
  }
  const Vector coef = design.colPivHouseholderQr().solve(radius);
  const Vector resid = design * coef - radius;
  stat.max_residual = resid.cwiseAbs().maxCoeff();
  stat.ratio = stat.max_residual / stat.diameter;
  return stat;
}

} // namespace splinelab
