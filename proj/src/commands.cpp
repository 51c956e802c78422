#include "splinelab/commands.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "splinelab/analysis.hpp"
#include "splinelab/bvp.hpp"
#include "splinelab/geometry.hpp"
#include "splinelab/pmp.hpp"
#include "splinelab/sphere.hpp"

namespace splinelab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- json access helpers -------------------------------------------------

const json& jreq(const json& j, const std::string& key) {
  if (!j.contains(key)) throw InputError("manifest: missing field '" + key + "'");
  return j.at(key);
}

double jnum(const json& j, const std::string& key) {
  const json& v = jreq(j, key);
  if (!v.is_number()) throw InputError("manifest: field '" + key + "' must be a number");
  return v.get<double>();
}

double jnum_or(const json& j, const std::string& key, double def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_number()) throw InputError("manifest: field '" + key + "' must be a number");
  return j.at(key).get<double>();
}

long jint_or(const json& j, const std::string& key, long def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_number_integer())
    throw InputError("manifest: field '" + key + "' must be an integer");
  return j.at(key).get<long>();
}

std::string jstr(const json& j, const std::string& key) {
  const json& v = jreq(j, key);
  if (!v.is_string()) throw InputError("manifest: field '" + key + "' must be a string");
  return v.get<std::string>();
}

std::string jstr_or(const json& j, const std::string& key, const std::string& def) {
  if (!j.contains(key)) return def;
  return jstr(j, key);
}

Vector jvec(const json& j, const std::string& key) {
  const json& v = jreq(j, key);
  if (!v.is_array()) throw InputError("manifest: field '" + key + "' must be an array");
  Vector out(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw InputError("manifest: '" + key + "' entries must be numbers");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

IntegratorConfig parse_integrator(const json& doc) {
  IntegratorConfig cfg;
  if (!doc.contains("integrator")) return cfg;
  const json& j = doc.at("integrator");
  cfg.tol = jnum_or(j, "tol", cfg.tol);
  cfg.h0 = jnum_or(j, "h0", cfg.h0);
  cfg.hmin = jnum_or(j, "hmin", cfg.hmin);
  cfg.hmax = jnum_or(j, "hmax", cfg.hmax);
  cfg.max_steps = jint_or(j, "max_steps", cfg.max_steps);
  cfg.validate();
  return cfg;
}

CostModel parse_cost(const json& doc) {
  if (!doc.contains("cost")) return CostModel::cubic(1.0);
  const json& j = doc.at("cost");
  const std::string type = jstr(j, "type");
  if (type == "cubic") return CostModel::cubic(jnum_or(j, "beta", 1.0));
  if (type == "time-minimal") return CostModel::time_minimal(jnum_or(j, "bound", 1.0));
  throw InputError("manifest: cost type must be 'cubic' or 'time-minimal'");
}

// ---- output helpers --------------------------------------------------------

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

struct OutputContext {
  fs::path dir;
  std::string hash;
  std::string manifest_name;
  std::vector<std::string> formats;  // empty = all
  std::vector<std::string> written;

  bool wants(const std::string& fmt) const {
    return formats.empty() || std::find(formats.begin(), formats.end(), fmt) != formats.end();
  }

  std::string provenance_header() const {
    std::ostringstream os;
    os << "# splinelab " << kVersion << "\n# manifest-hash " << hash << "\n";
    return os.str();
  }

  json provenance_json() const {
    return json{{"tool", "splinelab"},
                {"version", kVersion},
                {"manifest", manifest_name},
                {"manifest_hash", hash}};
  }

  void emit(const std::string& name, const std::string& content) {
    const fs::path p = dir / name;
    write_file_atomic(p.string(), content);
    written.push_back(p.string());
  }

  void emit_csv(const std::string& name, const std::vector<std::string>& columns,
                const std::vector<std::vector<double>>& rows) {
    if (!wants("csv")) return;
    std::ostringstream os;
    os << provenance_header();
    for (size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << "\n";
    for (const auto& row : rows) {
      for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << fmt17(row[i]);
      os << "\n";
    }
    emit(name, os.str());
  }

  void emit_json(const std::string& name, json j) {
    if (!wants("json")) return;
    j["provenance"] = provenance_json();
    emit(name, j.dump(2) + "\n");
  }

  void emit_svg(const std::string& name, const std::string& content) {
    if (!wants("svg")) return;
    emit(name, content);
  }
};

json drift_json(const std::vector<DriftEntry>& drifts) {
  json arr = json::array();
  for (const auto& d : drifts)
    arr.push_back(json{{"name", d.name},
                       {"initial", d.initial},
                       {"max_abs_drift", d.max_abs_drift},
                       {"max_rel_drift", d.max_rel_drift}});
  return arr;
}

std::vector<double> grid_times(double t0, double t1, int points) {
  if (points < 1) throw InputError("manifest: output.points must be >= 1");
  std::vector<double> out(static_cast<size_t>(points));
  for (int i = 1; i <= points; ++i)
    out[static_cast<size_t>(i - 1)] = t0 + (t1 - t0) * i / points;
  return out;
}

// ---- per-system integration setups ----------------------------------------

struct SystemSetup {
  OdeField field;
  Vector y0;
  std::vector<std::string> columns;                       // state columns after t
  std::function<std::vector<double>(double, const Vector&)> row;
  std::vector<NamedQuantity> audited;
};

SystemSetup setup_split(const json& doc, std::shared_ptr<ChartGeometry> geom, CostModel cost) {
  const json& init = jreq(doc, "initial");
  const int n = geom->dim();
  SplitState s0{jvec(init, "x"), jvec(init, "v"), jvec(init, "p"), jvec(init, "alpha")};
  if (s0.v.size() != n || s0.p.size() != n || s0.alpha.size() != n || s0.x.size() != n)
    throw InputError("manifest: split initial state has wrong dimensions");

  SystemSetup su;
  su.field = [geom, cost, n](double, const Vector& y, Vector& dy) {
    dy = pack_split(split_field(*geom, cost, unpack_split(y, n)));
  };
  su.y0 = pack_split(s0);
  for (const char* base : {"x", "v", "p", "alpha"})
    for (int i = 1; i <= n; ++i) su.columns.push_back(std::string(base) + std::to_string(i));
  su.columns.push_back("H");
  su.row = [geom, cost, n](double, const Vector& y) {
    std::vector<double> r(y.data(), y.data() + y.size());
    r.push_back(optimal_hamiltonian(*geom, cost, unpack_split(y, n)));
    return r;
  };
  su.audited = {{"H", [geom, cost, n](double, const Vector& y) {
                   return optimal_hamiltonian(*geom, cost, unpack_split(y, n));
                 }}};
  return su;
}

SystemSetup setup_landmark(const json& doc) {
  const json& init = jreq(doc, "initial");
  const Vector x = jvec(init, "x"), p = jvec(init, "p");
  if (x.size() != 2 || p.size() != 2)
    throw InputError("manifest: landmark initial state needs x[2], p[2]");
  SystemSetup su;
  su.field = [](double, const Vector& y, Vector& dy) {
    dy = landmark_geodesic_field(Eigen::Vector4d(y));
  };
  su.y0 = Vector(4);
  su.y0 << x, p;
  su.columns = {"x1", "x2", "p1", "p2", "H"};
  su.row = [](double, const Vector& y) {
    std::vector<double> r(y.data(), y.data() + 4);
    r.push_back(landmark_hamiltonian(Eigen::Vector4d(y)));
    return r;
  };
  su.audited = {{"H", [](double, const Vector& y) {
                   return landmark_hamiltonian(Eigen::Vector4d(y));
                 }}};
  return su;
}

ReducedState parse_reduced_initial(const json& init, double mu_hint) {
  if (init.contains("M")) {
    const Vector M = jvec(init, "M");
    if (M.size() != 3) throw InputError("manifest: reduced initial M must have 3 entries");
    return {jnum(init, "v"), jnum(init, "a"), Vector3(M[0], M[1], M[2])};
  }
  const double theta = jnum(init, "theta"), z = jnum(init, "z");
  return {jnum(init, "v"), jnum(init, "a"), momentum_from_angles(mu_hint, theta, z)};
}

SystemSetup setup_reduced(const json& doc) {
  const json& prm_j = jreq(doc, "params");
  const ReducedParams prm{jnum_or(prm_j, "beta", 1.0), jnum_or(prm_j, "r", 1.0)};
  const ReducedState s0 = parse_reduced_initial(jreq(doc, "initial"), jnum_or(prm_j, "mu", 1.0));

  SystemSetup su;
  su.field = reduced_ode_field(prm);
  su.y0 = pack_reduced(s0);
  su.columns = {"v", "a", "M1", "M2", "M3", "H", "Casimir"};
  su.row = [prm](double, const Vector& y) {
    const ReducedState s = unpack_reduced(y);
    std::vector<double> r(y.data(), y.data() + 5);
    r.push_back(reduced_hamiltonian(s, prm));
    r.push_back(s.casimir());
    return r;
  };
  su.audited = {{"H", [prm](double, const Vector& y) {
                   return reduced_hamiltonian(unpack_reduced(y), prm);
                 }},
                {"Casimir", [](double, const Vector& y) {
                   return unpack_reduced(y).casimir();
                 }}};
  return su;
}

SystemSetup setup_extrinsic(const json& doc) {
  const json& init = jreq(doc, "initial");
  const double beta = jnum_or(jreq(doc, "params"), "beta", 1.0);
  const double radius = jnum_or(init, "r", 1.0);
  ExtrinsicSphereState s0;
  s0.x0 = jvec(init, "x0");
  s0.x1 = jvec(init, "x1");
  s0.x2 = jvec(init, "x2");
  s0.x3 = jvec(init, "x3");
  s0.radius = radius;
  const int m = s0.ambient_dim();
  if (s0.x1.size() != m || s0.x2.size() != m || s0.x3.size() != m)
    throw InputError("manifest: extrinsic initial vectors must share one dimension");
  if (s0.constraint_violation() > kExtrinsicInputTol)
    throw InputError("manifest: extrinsic initial state violates the sphere constraints");

  SystemSetup su;
  su.field = crouch_leite_ode_field(beta, radius);
  su.y0 = pack_extrinsic(s0);
  for (const char* base : {"x0", "x1", "x2", "x3"})
    for (int i = 1; i <= m; ++i)
      su.columns.push_back(std::string(base) + "_" + std::to_string(i));
  su.columns.push_back("H");
  su.row = [beta, m](double, const Vector& y) {
    std::vector<double> r(y.data(), y.data() + y.size());
    // H = |x2|^2/(2 beta) - x3.x1 in split variables.
    const double h = y.segment(2 * m, m).squaredNorm() / (2.0 * beta) -
                     y.segment(3 * m, m).dot(y.segment(m, m));
    r.push_back(h);
    return r;
  };
  su.audited = {
      {"H",
       [beta, m](double, const Vector& y) {
         return y.segment(2 * m, m).squaredNorm() / (2.0 * beta) -
                y.segment(3 * m, m).dot(y.segment(m, m));
       }},
      {"|x0|-r",
       [radius, m](double, const Vector& y) { return y.head(m).norm() - radius; }},
      {"x0.x1", [m](double, const Vector& y) { return y.head(m).dot(y.segment(m, m)); }},
      {"x0.x2", [m](double, const Vector& y) { return y.head(m).dot(y.segment(2 * m, m)); }},
      {"x0.x3", [m](double, const Vector& y) { return y.head(m).dot(y.segment(3 * m, m)); }}};
  return su;
}

void parse_reconstruction_initial(const json& doc, const ReconstructionParams& prm, Matrix3& R0,
                                  double& v0, double& a0, double& theta0, double& phi0) {
  const json& init = jreq(doc, "initial");
  R0 = Matrix3::Identity();
  if (init.contains("R0")) {
    const Vector r = jvec(init, "R0");
    if (r.size() != 9) throw InputError("manifest: R0 must have 9 entries (columns stacked)");
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 3; ++i) R0(i, c) = r[3 * c + i];
  }
  if (jstr_or(init, "type", "explicit") == "fixed-point") {
    const double branch = jnum_or(init, "branch", 1.0);
    v0 = std::cbrt(prm.mu * prm.r / (prm.beta * std::sqrt(2.0)));
    a0 = 0.0;
    theta0 = branch >= 0.0 ? M_PI / 2.0 : 3.0 * M_PI / 2.0;
    phi0 = M_PI / 4.0;
    return;
  }
  v0 = jnum(init, "v");
  a0 = jnum(init, "a");
  theta0 = jnum(init, "theta");
  phi0 = jnum(init, "phi");
}

SystemSetup setup_reconstruction(const json& doc) {
  const json& prm_j = jreq(doc, "params");
  const ReconstructionParams prm{jnum_or(prm_j, "beta", 1.0), jnum_or(prm_j, "r", 1.0),
                                 jnum_or(prm_j, "mu", 1.0)};
  Matrix3 R0;
  double v0, a0, theta0, phi0;
  parse_reconstruction_initial(doc, prm, R0, v0, a0, theta0, phi0);

  SystemSetup su;
  su.field = reconstruction_ode_field(prm);
  su.y0 = pack_reconstruction(R0, v0, a0, theta0, phi0);
  su.columns = {"gx", "gy", "gz", "v", "a", "theta", "phi"};
  su.row = [prm](double, const Vector& y) {
    return std::vector<double>{prm.r * y[6], prm.r * y[7], prm.r * y[8],
                               y[9], y[10], y[11], y[12]};
  };
  const SphericalParams sp{prm.beta, prm.r, prm.mu};
  su.audited = {{"H",
                 [sp](double, const Vector& y) {
                   return reduced_hamiltonian_spherical(
                       SphericalState(y[9], y[10], y[11], std::sin(y[12])), sp);
                 }},
                {"frame-orthogonality", [](double, const Vector& y) {
                   Matrix3 R;
                   for (int c = 0; c < 3; ++c)
                     for (int i = 0; i < 3; ++i) R(i, c) = y[3 * c + i];
                   return orthogonality_drift(R);
                 }}};
  return su;
}

SystemSetup make_system(const json& doc) {
  const std::string system = jstr(doc, "system");
  if (system == "split") {
    std::shared_ptr<ChartGeometry> geom = make_geometry(jstr(doc, "geometry"));
    return setup_split(doc, geom, parse_cost(doc));
  }
  if (system == "landmark-geodesic") return setup_landmark(doc);
  if (system == "reduced") return setup_reduced(doc);
  if (system == "extrinsic") return setup_extrinsic(doc);
  if (system == "reconstruction") return setup_reconstruction(doc);
  throw InputError("manifest: unknown system '" + system + "'");
}

// ---- commands --------------------------------------------------------------

// Reduced integration with the v=0 hand-over to the extrinsic system.
void cmd_integrate_regularized(const json& doc, OutputContext& out) {
  const json& prm_j = jreq(doc, "params");
  const double beta = jnum_or(prm_j, "beta", 1.0);
  if (jnum_or(prm_j, "r", 1.0) != 1.0)
    throw InputError("manifest: regularized reduced integration requires r = 1");
  const ReducedState s0 = parse_reduced_initial(jreq(doc, "initial"), jnum_or(prm_j, "mu", 1.0));
  const json& time = jreq(doc, "time");
  const double t0 = jnum_or(time, "t0", 0.0), t1 = jnum(time, "t1");
  RegularizationOptions opts;
  opts.integrator = parse_integrator(doc);
  const RegularizedTrajectory rt = integrate_reduced_regularized(s0, beta, t0, t1, opts);

  const ReducedParams prm{beta, 1.0};
  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < rt.reduced.size(); ++i) {
    const ReducedState s = unpack_reduced(rt.reduced.y[i]);
    rows.push_back({rt.reduced.t[i], s.v, s.a, s.M[0], s.M[1], s.M[2],
                    reduced_hamiltonian(s, prm), s.casimir()});
  }
  out.emit_csv("trajectory.csv", {"t", "v", "a", "M1", "M2", "M3", "H", "Casimir"}, rows);

  json meta;
  meta["status"] = rt.ok ? "done" : "failed";
  meta["message"] = rt.message;
  meta["t_end"] = rt.reduced.t.empty() ? t0 : rt.reduced.t.back();
  json spans = json::array();
  for (const auto& [a, b] : rt.lifted_spans) spans.push_back(json::array({a, b}));
  meta["lifted_spans"] = spans;
  out.emit_json("meta.json", meta);
  if (!rt.ok) throw Error("regularized integration failed: " + rt.message);
}

void cmd_integrate(const json& doc, OutputContext& out, int /*threads*/) {
  if (doc.contains("regularize") && doc.at("regularize").get<bool>()) {
    if (jstr(doc, "system") != "reduced")
      throw InputError("manifest: 'regularize' applies to the reduced system only");
    cmd_integrate_regularized(doc, out);
    return;
  }
  SystemSetup su = make_system(doc);
  const json& time = jreq(doc, "time");
  const double t0 = jnum_or(time, "t0", 0.0), t1 = jnum(time, "t1");
  const int points = static_cast<int>(jint_or(
      doc.contains("output") ? doc.at("output") : json::object(), "points", 200));
  const IntegratorConfig cfg = parse_integrator(doc);

  Trajectory traj = integrate(su.field, su.y0, t0, t1, cfg, grid_times(t0, t1, points));

  std::vector<std::string> columns = {"t"};
  columns.insert(columns.end(), su.columns.begin(), su.columns.end());
  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < traj.size(); ++i) {
    std::vector<double> row{traj.t[i]};
    const auto vals = su.row(traj.t[i], traj.y[i]);
    row.insert(row.end(), vals.begin(), vals.end());
    rows.push_back(std::move(row));
  }
  out.emit_csv("trajectory.csv", columns, rows);

  json meta;
  meta["status"] = to_string(traj.status);
  meta["message"] = traj.message;
  meta["t_end"] = traj.t.back();
  meta["steps_accepted"] = traj.steps_accepted;
  meta["steps_rejected"] = traj.steps_rejected;
  meta["integrator"] = {{"tol", cfg.tol}, {"h0", cfg.h0}, {"hmin", cfg.hmin},
                        {"hmax", cfg.hmax}, {"max_steps", cfg.max_steps}};
  meta["drift"] = drift_json(conserved_audit(traj, su.audited));
  out.emit_json("meta.json", meta);

  if (!traj.ok())
    throw Error("integration failed (" + to_string(traj.status) + "): " + traj.message);
}

void cmd_audit(const json& doc, OutputContext& out, int /*threads*/) {
  SystemSetup su = make_system(doc);
  const json& time = jreq(doc, "time");
  const double t0 = jnum_or(time, "t0", 0.0), t1 = jnum(time, "t1");
  const IntegratorConfig cfg = parse_integrator(doc);
  Trajectory traj = integrate(su.field, su.y0, t0, t1, cfg);

  json meta;
  meta["status"] = to_string(traj.status);
  meta["message"] = traj.message;
  meta["t_end"] = traj.t.back();
  meta["samples"] = traj.size();
  meta["drift"] = drift_json(conserved_audit(traj, su.audited));
  out.emit_json("audit.json", meta);

  if (!traj.ok())
    throw Error("audit integration failed (" + to_string(traj.status) + "): " + traj.message);
}

void cmd_shoot(const json& doc, OutputContext& out, int threads) {
  const std::string geometry_id = jstr(doc, "geometry");
  std::shared_ptr<ChartGeometry> geom = make_geometry(geometry_id);
  const CostModel cost = parse_cost(doc);
  const IntegratorConfig icfg = parse_integrator(doc);

  const json& bj = jreq(doc, "boundary");
  ShootOptions sopts;
  if (doc.contains("shoot")) {
    const json& sj = doc.at("shoot");
    sopts.mismatch_tol = jnum_or(sj, "tol", sopts.mismatch_tol);
    sopts.max_iterations = static_cast<int>(jint_or(sj, "max_iterations", sopts.max_iterations));
    sopts.multistart = static_cast<int>(jint_or(sj, "multistart", sopts.multistart));
    sopts.rng_seed = static_cast<std::uint64_t>(jint_or(sj, "rng_seed",
                                                        static_cast<long>(sopts.rng_seed)));
  }
  sopts.threads = threads;

  ShootingResult result;
  std::string backend = jstr_or(doc, "backend", "");
  const bool is_sphere = geometry_id.rfind("sphere-chart:", 0) == 0;
  if (backend.empty()) backend = (is_sphere && cost.is_cubic()) ? "extrinsic" : "chart";

  if (backend == "extrinsic") {
    if (!is_sphere || !cost.is_cubic())
      throw InputError("manifest: extrinsic backend needs a sphere-chart geometry and cubic cost");
    const auto* sphere = dynamic_cast<const SphereChartGeometry*>(geom.get());
    SphereBoundary sb;
    sb.T = jnum(bj, "T");
    if (jstr_or(doc, "frame", "chart") == "ambient") {
      sb.q0 = Vector3(jvec(bj, "q0"));
      sb.v0 = Vector3(jvec(bj, "v0"));
      sb.q1 = Vector3(jvec(bj, "q1"));
      sb.v1 = Vector3(jvec(bj, "v1"));
    } else {
      sb.q0 = sphere->embed(jvec(bj, "q0"));
      sb.v0 = sphere->embed_jacobian(jvec(bj, "q0")) * Eigen::Vector2d(jvec(bj, "v0"));
      sb.q1 = sphere->embed(jvec(bj, "q1"));
      sb.v1 = sphere->embed_jacobian(jvec(bj, "q1")) * Eigen::Vector2d(jvec(bj, "v1"));
    }
    result = shoot_sphere_extrinsic(sphere->radius(), cost.beta, sb, sopts, icfg);
  } else if (backend == "chart") {
    BoundaryData bd{jvec(bj, "q0"), jvec(bj, "v0"), jvec(bj, "q1"), jvec(bj, "v1"),
                    jnum_or(bj, "T", 0.0)};
    if (cost.is_cubic()) {
      if (!(bd.T > 0.0)) throw InputError("manifest: cubic shooting needs boundary.T > 0");
      result = shoot(*geom, cost, bd, sopts, icfg);
    } else {
      result = tmin_shoot(*geom, cost.bound, bd, sopts, icfg);
    }
  } else {
    throw InputError("manifest: backend must be 'chart' or 'extrinsic'");
  }

  json rj;
  rj["converged"] = result.converged;
  rj["backend"] = backend;
  rj["mismatch"] = result.mismatch;
  rj["iterations"] = result.iterations;
  rj["start_index"] = result.start_index;
  rj["T"] = result.T;
  rj["cost"] = result.cost;
  if (result.p0.size()) {
    rj["p0"] = std::vector<double>(result.p0.data(), result.p0.data() + result.p0.size());
    rj["alpha0"] =
        std::vector<double>(result.alpha0.data(), result.alpha0.data() + result.alpha0.size());
  }
  if (!result.failure.empty()) rj["failure"] = result.failure;
  json extremals = json::array();
  for (const auto& e : result.extremals)
    extremals.push_back(json{{"cost", e.cost}, {"mismatch", e.mismatch},
                             {"start_index", e.start_index}, {"T", e.T}});
  rj["extremals"] = extremals;
  out.emit_json("result.json", rj);

  if (result.converged && result.trajectory.size() > 0) {
    std::vector<std::string> columns = {"t"};
    const size_t width = static_cast<size_t>(result.trajectory.y.front().size());
    for (size_t i = 1; i <= width; ++i) columns.push_back("y" + std::to_string(i));
    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < result.trajectory.size(); ++i) {
      std::vector<double> row{result.trajectory.t[i]};
      const Vector& y = result.trajectory.y[i];
      row.insert(row.end(), y.data(), y.data() + y.size());
      rows.push_back(std::move(row));
    }
    out.emit_csv("trajectory.csv", columns, rows);
  }

  if (!result.converged) throw Error("shooting failed: " + result.failure);
}

std::vector<std::pair<double, double>> parse_seed_grid_string(const std::string& text) {
  // "v=min:max:count,z=min:max:count"
  double vmin = 0, vmax = 0, zmin = 0, zmax = 0;
  int vcount = 0, zcount = 0;
  std::istringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    char axis = 0;
    double lo = 0, hi = 0;
    int count = 0;
    if (std::sscanf(part.c_str(), "%c=%lf:%lf:%d", &axis, &lo, &hi, &count) != 4)
      throw InputError("bad --seed-grid component '" + part + "'");
    if (axis == 'v') {
      vmin = lo; vmax = hi; vcount = count;
    } else if (axis == 'z') {
      zmin = lo; zmax = hi; zcount = count;
    } else {
      throw InputError("--seed-grid axes must be v and z");
    }
  }
  if (vcount < 1 || zcount < 1) throw InputError("--seed-grid needs both v and z ranges");
  std::vector<std::pair<double, double>> seeds;
  for (int i = 0; i < vcount; ++i)
    for (int j = 0; j < zcount; ++j) {
      const double v = vcount == 1 ? vmin : vmin + (vmax - vmin) * i / (vcount - 1);
      const double z = zcount == 1 ? zmin : zmin + (zmax - zmin) * j / (zcount - 1);
      seeds.emplace_back(v, z);
    }
  return seeds;
}

std::vector<std::pair<double, double>> parse_seed_grid_json(const json& j) {
  auto axis = [&](const std::string& key, double& lo, double& hi, int& count) {
    const json& a = jreq(j, key);
    lo = jnum(a, "min");
    hi = jnum(a, "max");
    count = static_cast<int>(jint_or(a, "count", 1));
  };
  double vmin, vmax, zmin, zmax;
  int vcount, zcount;
  axis("v", vmin, vmax, vcount);
  axis("z", zmin, zmax, zcount);
  std::vector<std::pair<double, double>> seeds;
  for (int i = 0; i < vcount; ++i)
    for (int jz = 0; jz < zcount; ++jz) {
      const double v = vcount == 1 ? vmin : vmin + (vmax - vmin) * i / (vcount - 1);
      const double z = zcount == 1 ? zmin : zmin + (zmax - zmin) * jz / (zcount - 1);
      seeds.emplace_back(v, z);
    }
  return seeds;
}

void cmd_poincare(const json& doc, OutputContext& out, int threads,
                  const std::string& seed_grid_override) {
  const json& sj = jreq(doc, "section");
  SectionSpec spec;
  spec.h = jnum(sj, "h");
  spec.mu = jnum_or(sj, "mu", 2.0);
  spec.beta = jnum_or(sj, "beta", 1.0);
  spec.r = jnum_or(sj, "r", 2.0);
  spec.direction = static_cast<int>(jint_or(sj, "direction", 1));
  spec.crossings_per_seed = static_cast<int>(jint_or(sj, "crossings", 256));
  spec.max_time = jnum_or(sj, "max_time", 1e4);
  spec.v_max_factor = jnum_or(sj, "v_max_factor", 1e3);
  spec.integrator = parse_integrator(doc);
  spec.threads = threads;

  if (!seed_grid_override.empty()) {
    spec.seeds = parse_seed_grid_string(seed_grid_override);
  } else if (sj.contains("seeds")) {
    for (const auto& s : sj.at("seeds")) {
      if (!s.is_array() || s.size() != 2)
        throw InputError("manifest: section.seeds entries must be [v, z] pairs");
      spec.seeds.emplace_back(s[0].get<double>(), s[1].get<double>());
    }
  } else if (sj.contains("seed_grid")) {
    spec.seeds = parse_seed_grid_json(sj.at("seed_grid"));
  } else {
    throw InputError("manifest: section needs 'seeds' or 'seed_grid'");
  }

  const SectionPointSet set = poincare_section(spec);

  std::vector<std::vector<double>> rows;
  for (const auto& p : set.points)
    rows.push_back({static_cast<double>(p.seed_id), static_cast<double>(p.crossing_index),
                    p.t, p.v, p.a, p.z, p.h_check, p.casimir_check});
  out.emit_csv("section.csv",
               {"seed_id", "crossing_index", "t", "v", "a", "z", "H_check", "casimir_check"},
               rows);

  json meta;
  meta["escapes"] = set.escapes();
  meta["confined"] = set.confined();
  json seeds = json::array();
  for (const auto& s : set.seeds) {
    json e{{"seed_id", s.seed_id}, {"v", s.v_seed}, {"z", s.z_seed}, {"a", s.a_seed},
           {"infeasible", s.infeasible}, {"escaped", s.escaped}, {"aborted", s.aborted},
           {"time_capped", s.time_capped}, {"crossings", s.crossings},
           {"end_time", s.end_time}};
    if (!s.note.empty()) e["note"] = s.note;
    // curve-thinness statistic of this seed's point cloud
    std::vector<Vector3> cloud;
    for (const auto& p : set.points)
      if (p.seed_id == s.seed_id) cloud.emplace_back(p.v, p.a, p.z);
    const CurveStat stat = curve_thinness(cloud);
    e["thinness_ratio"] = stat.ratio;
    e["diameter"] = stat.diameter;
    seeds.push_back(e);
  }
  meta["seeds"] = seeds;
  meta["spec"] = {{"h", spec.h}, {"mu", spec.mu}, {"beta", spec.beta}, {"r", spec.r},
                  {"direction", spec.direction}, {"crossings", spec.crossings_per_seed},
                  {"max_time", spec.max_time}, {"v_max_factor", spec.v_max_factor},
                  {"n_seeds", spec.seeds.size()}};
  out.emit_json("meta.json", meta);

  if (!set.points.empty()) {
    double vmin = 1e300, vmax = -1e300, amin = 1e300, amax = -1e300;
    std::vector<Eigen::Vector2d> pts;
    for (const auto& p : set.points) {
      pts.emplace_back(p.v, p.a);
      vmin = std::min(vmin, p.v);
      vmax = std::max(vmax, p.v);
      amin = std::min(amin, p.a);
      amax = std::max(amax, p.a);
    }
    const double vpad = std::max(1e-6, 0.05 * (vmax - vmin));
    const double apad = std::max(1e-6, 0.05 * (amax - amin));
    const SvgBounds bounds{vmin - vpad, vmax + vpad, amin - apad, amax + apad};
    out.emit_svg("section.svg",
                 svg_scatter(pts, "v", "a", bounds,
                             {{"h", fmt17(spec.h)}, {"mu", fmt17(spec.mu)},
                              {"beta", fmt17(spec.beta)}, {"r", fmt17(spec.r)}}));
  }
}

void cmd_fixed_points(const json& doc, OutputContext& out, int /*threads*/) {
  const json& pj = jreq(doc, "params");
  const double v = jnum(pj, "v");
  const double beta = jnum_or(pj, "beta", 1.0);
  const double r = jnum_or(pj, "r", 1.0);

  const auto fps = fixed_points(v, beta, r);
  const double energy = equilibrium_energy(v, beta, r);
  const auto eig = loxodromic_eigenvalues(v, r);
  const Linearization lin = linearize_fixed_point(v, r, beta, +1);

  json rj;
  json table = json::array();
  std::vector<std::vector<double>> rows;
  for (int b = 0; b < 2; ++b) {
    const ReducedState& s = fps[static_cast<size_t>(b)];
    table.push_back(json{{"branch", b == 0 ? 1 : -1},
                         {"v", s.v},
                         {"a", s.a},
                         {"M", {s.M[0], s.M[1], s.M[2]}},
                         {"mu", s.casimir()},
                         {"energy", energy}});
    rows.push_back({static_cast<double>(b == 0 ? 1 : -1), s.v, s.a, s.M[0], s.M[1], s.M[2],
                    s.casimir(), energy, std::abs(eig[0].real()), std::abs(eig[0].imag())});
  }
  rj["equilibria"] = table;
  json eigs = json::array();
  for (const auto& l : eig) eigs.push_back(json{{"re", l.real()}, {"im", l.imag()}});
  rj["eigenvalues_closed_form"] = eigs;
  rj["char_poly"] = {lin.char_poly[0], lin.char_poly[1], lin.char_poly[2], lin.char_poly[3],
                     lin.char_poly[4]};
  json jeigs = json::array();
  for (const auto& l : lin.jacobian_eigenvalues)
    jeigs.push_back(json{{"re", l.real()}, {"im", l.imag()}});
  rj["eigenvalues_numeric"] = jeigs;
  out.emit_json("fixed_points.json", rj);
  out.emit_csv("fixed_points.csv",
               {"branch", "v", "a", "M1", "M2", "M3", "mu", "energy", "lambda_re_abs",
                "lambda_im_abs"},
               rows);
}

void cmd_reconstruct(const json& doc, OutputContext& out, int /*threads*/) {
  const json& prm_j = jreq(doc, "params");
  const ReconstructionParams prm{jnum_or(prm_j, "beta", 1.0), jnum_or(prm_j, "r", 1.0),
                                 jnum_or(prm_j, "mu", 1.0)};
  Matrix3 R0;
  double v0, a0, theta0, phi0;
  parse_reconstruction_initial(doc, prm, R0, v0, a0, theta0, phi0);
  const json& time = jreq(doc, "time");
  const double t1 = jnum(time, "t1");

  ReconstructOptions opts;
  opts.integrator = parse_integrator(doc);
  opts.samples = static_cast<int>(jint_or(
      doc.contains("output") ? doc.at("output") : json::object(), "points", 200));
  opts.reproject = doc.contains("reproject") && doc.at("reproject").get<bool>();

  const ReconstructedTrajectory rec =
      reconstruct_trajectory(prm, R0, v0, a0, theta0, phi0, t1, opts);

  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < rec.t.size(); ++i)
    rows.push_back({rec.t[i], rec.gamma[i][0], rec.gamma[i][1], rec.gamma[i][2],
                    rec.v[i], rec.a[i], rec.theta[i], rec.phi[i]});
  out.emit_csv("curve.csv", {"t", "gx", "gy", "gz", "v", "a", "theta", "phi"}, rows);

  json meta;
  meta["status"] = to_string(rec.status);
  meta["message"] = rec.message;
  meta["max_orthogonality_drift"] = rec.max_orthogonality_drift;
  meta["reprojections"] = rec.reprojections;
  meta["params"] = {{"beta", prm.beta}, {"r", prm.r}, {"mu", prm.mu}};
  meta["initial"] = {{"v", v0}, {"a", a0}, {"theta", theta0}, {"phi", phi0}};
  out.emit_json("meta.json", meta);

  if (!rec.ok())
    throw Error("reconstruction failed (" + to_string(rec.status) + "): " + rec.message);
}

} // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  fs::create_directories(target.parent_path().empty() ? fs::path(".") : target.parent_path());
  const fs::path tmp = target.parent_path() /
                       (target.filename().string() + ".tmp-" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
  }
  fs::rename(tmp, target);
}

std::vector<std::string> run_manifest(const RunManifest& manifest, const RunOverrides& overrides) {
  OutputContext out;
  out.dir = overrides.out_dir.empty() ? manifest.out_dir("out") : overrides.out_dir;
  out.hash = manifest.hash;
  out.manifest_name = manifest.source_path;
  out.formats = overrides.formats;
  fs::create_directories(out.dir);

  const int threads = std::max(1, overrides.threads);
  const std::string cmd = manifest.command();
  if (cmd == "integrate") {
    cmd_integrate(manifest.doc, out, threads);
  } else if (cmd == "audit") {
    cmd_audit(manifest.doc, out, threads);
  } else if (cmd == "shoot") {
    cmd_shoot(manifest.doc, out, threads);
  } else if (cmd == "poincare") {
    cmd_poincare(manifest.doc, out, threads, overrides.seed_grid);
  } else if (cmd == "fixed-points") {
    cmd_fixed_points(manifest.doc, out, threads);
  } else if (cmd == "reconstruct") {
    cmd_reconstruct(manifest.doc, out, threads);
  } else {
    throw InputError("manifest: unknown command '" + cmd + "'");
  }
  return out.written;
}

} // namespace splinelab
