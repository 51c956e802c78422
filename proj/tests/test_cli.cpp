#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "splinelab/commands.hpp"
#include "splinelab/manifest.hpp"

using namespace splinelab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("splinelab-test-" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(SPLINELAB_BIN_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string config(const char* name) {
  return std::string(SPLINELAB_CONFIG_DIR) + "/" + name;
}

} // namespace

TEST_CASE("manifest parsing and hashing") {
  const RunManifest m = RunManifest::from_string(R"({"command":"integrate"})");
  CHECK(m.command() == "integrate");
  CHECK(m.hash.size() == 16);
  CHECK(m.hash == fnv1a_hex(R"({"command":"integrate"})"));
  CHECK_THROWS_AS(RunManifest::from_string("not json"), InputError);
  CHECK_THROWS_AS(RunManifest::from_string("[1,2]"), InputError);
  CHECK_THROWS_AS(RunManifest::from_string("{}").command(), InputError);
  CHECK_THROWS_AS(RunManifest::from_file("/nonexistent/file.json"), InputError);
}

TEST_CASE("integrate command produces trajectory and metadata") {
  const fs::path out = fresh_dir("integrate");
  const RunManifest m = RunManifest::from_file(config("flat_cubic.json"));
  RunOverrides ov;
  ov.out_dir = out.string();
  const auto files = run_manifest(m, ov);
  REQUIRE(files.size() == 2);
  CHECK(fs::exists(out / "trajectory.csv"));
  CHECK(fs::exists(out / "meta.json"));

  const std::string csv = slurp(out / "trajectory.csv");
  CHECK(csv.rfind("# splinelab", 0) == 0);
  CHECK(csv.find("# manifest-hash " + m.hash) != std::string::npos);
  CHECK(csv.find("t,x1,x2,x3,v1,v2,v3,p1,p2,p3,alpha1,alpha2,alpha3,H") != std::string::npos);

  const auto meta = nlohmann::json::parse(slurp(out / "meta.json"));
  CHECK(meta["status"] == "done");
  CHECK(meta["drift"].size() == 1);
  CHECK(meta["drift"][0]["max_rel_drift"].get<double>() < 1e-9);
  CHECK(meta["provenance"]["manifest_hash"] == m.hash);
}

TEST_CASE("outputs are byte-identical across repeated runs") {
  const fs::path out1 = fresh_dir("rep1"), out2 = fresh_dir("rep2");
  const RunManifest m = RunManifest::from_file(config("fixed_points.json"));
  RunOverrides ov1, ov2;
  ov1.out_dir = out1.string();
  ov2.out_dir = out2.string();
  run_manifest(m, ov1);
  run_manifest(m, ov2);
  CHECK(slurp(out1 / "fixed_points.json") == slurp(out2 / "fixed_points.json"));
  CHECK(slurp(out1 / "fixed_points.csv") == slurp(out2 / "fixed_points.csv"));

  SUBCASE("fixed-point table carries the reference values") {
    const auto fp = nlohmann::json::parse(slurp(out1 / "fixed_points.json"));
    const auto& eq = fp["equilibria"];
    REQUIRE(eq.size() == 2);
    CHECK(eq[0]["a"].get<double>() == 0.0);
    CHECK(eq[0]["M"][1].get<double>() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(eq[0]["mu"].get<double>() == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(eq[0]["energy"].get<double>() == doctest::Approx(1.5).epsilon(1e-14));
    const auto& eig = fp["eigenvalues_closed_form"];
    bool found = false;
    for (const auto& l : eig)
      if (std::abs(l["re"].get<double>() - 0.6050003337060556) < 1e-12 &&
          std::abs(l["im"].get<double>() - 1.1687708944803676) < 1e-12)
        found = true;
    CHECK(found);
    CHECK(fp["char_poly"][2].get<double>() == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(fp["char_poly"][4].get<double>() == doctest::Approx(3.0).epsilon(1e-8));
  }
}

TEST_CASE("format filter restricts outputs") {
  const fs::path out = fresh_dir("formats");
  const RunManifest m = RunManifest::from_file(config("fixed_points.json"));
  RunOverrides ov;
  ov.out_dir = out.string();
  ov.formats = {"csv"};
  run_manifest(m, ov);
  CHECK(fs::exists(out / "fixed_points.csv"));
  CHECK_FALSE(fs::exists(out / "fixed_points.json"));
}

TEST_CASE("reconstruct command reproduces the stationary reference run") {
  const fs::path out = fresh_dir("appendix");
  const RunManifest m = RunManifest::from_file(config("appendix_a.json"));
  RunOverrides ov;
  ov.out_dir = out.string();
  run_manifest(m, ov);
  const std::string csv = slurp(out / "curve.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line); // provenance
  std::getline(in, line);
  std::getline(in, line); // header
  REQUIRE(line == "t,gx,gy,gz,v,a,theta,phi");
  const double v0 = std::sqrt(2.0);
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
    REQUIRE(vals.size() == 8);
    CHECK(std::abs(vals[4] - v0) < 1e-10);          // v stays at the equilibrium speed
    CHECK(std::abs(vals[5]) < 1e-10);               // a stays 0
    CHECK(std::abs(vals[6] - M_PI / 2.0) < 1e-10);  // theta
    CHECK(std::abs(vals[7] - M_PI / 4.0) < 1e-10);  // phi
    ++rows;
  }
  CHECK(rows == 201);
}

TEST_CASE("poincare command emits section files") {
  const fs::path out = fresh_dir("poincare");
  RunManifest m = RunManifest::from_string(R"({
    "command": "poincare",
    "section": {"h": 0.01, "mu": 2.0, "beta": 1.0, "r": 2.0,
                "crossings": 12, "max_time": 200.0,
                "seeds": [[16.0, 0.0], [24.0, 0.0]]},
    "integrator": {"tol": 1e-13, "hmin": 1e-12, "hmax": 0.02}
  })");
  RunOverrides ov;
  ov.out_dir = out.string();
  run_manifest(m, ov);
  CHECK(fs::exists(out / "section.csv"));
  CHECK(fs::exists(out / "section.svg"));
  const auto meta = nlohmann::json::parse(slurp(out / "meta.json"));
  CHECK(meta["escapes"].get<int>() == 0);
  CHECK(meta["confined"].get<int>() == 2);
  const std::string csv = slurp(out / "section.csv");
  CHECK(csv.find("seed_id,crossing_index,t,v,a,z,H_check,casimir_check") != std::string::npos);

  SUBCASE("seed-grid override replaces the manifest seeds") {
    const fs::path out2 = fresh_dir("poincare-grid");
    RunOverrides ov2;
    ov2.out_dir = out2.string();
    ov2.seed_grid = "v=16:20:2,z=0:0:1";
    run_manifest(m, ov2);
    const auto meta2 = nlohmann::json::parse(slurp(out2 / "meta.json"));
    CHECK(meta2["spec"]["n_seeds"].get<int>() == 2);
  }
}

TEST_CASE("manifest validation errors") {
  RunOverrides ov;
  ov.out_dir = fresh_dir("bad").string();
  CHECK_THROWS_AS(run_manifest(RunManifest::from_string(R"({"command":"warp"})"), ov),
                  InputError);
  CHECK_THROWS_AS(
      run_manifest(RunManifest::from_string(
                       R"({"command":"integrate","system":"split","geometry":"flat:2"})"),
                   ov),
      InputError);
  CHECK_THROWS_AS(
      run_manifest(RunManifest::from_string(
                       R"({"command":"integrate","system":"nope","time":{"t1":1}})"),
                   ov),
      InputError);
}

TEST_CASE("binary exit codes") {
  SUBCASE("success is 0") {
    const fs::path out = fresh_dir("exit0");
    CHECK(run_binary("--manifest " + config("fixed_points.json") + " --out " + out.string()) ==
          0);
  }
  SUBCASE("bad manifests exit 2") {
    const fs::path dir = fresh_dir("exit2");
    const fs::path bad = dir / "bad.json";
    std::ofstream(bad) << "{\"command\": \"nope\"}";
    CHECK(run_binary("--manifest " + bad.string() + " --out " + dir.string()) == 2);
    CHECK(run_binary("--manifest /does/not/exist.json") == 2);
    CHECK(run_binary("--definitely-not-a-flag") == 2);
  }
  SUBCASE("numerical failures exit 3 and keep the last state") {
    const fs::path dir = fresh_dir("exit3");
    const fs::path man = dir / "budget.json";
    std::ofstream(man) << R"({
      "command": "integrate", "system": "reduced",
      "params": {"beta": 1.0, "r": 2.0},
      "initial": {"v": 1.3, "a": 0.2, "M": [0.6, 1.6, 1.04]},
      "time": {"t1": 100.0}, "output": {"points": 50},
      "integrator": {"tol": 1e-13, "max_steps": 40}})";
    CHECK(run_binary("--manifest " + man.string() + " --out " + dir.string()) == 3);
    CHECK(fs::exists(dir / "trajectory.csv"));
    const auto meta = nlohmann::json::parse(slurp(dir / "meta.json"));
    CHECK(meta["status"].get<std::string>() == "max-steps");

    const fs::path man2 = dir / "singular.json";
    // degenerate time-minimal data: the alpha = 0 extremal is singular
    std::ofstream(man2) << R"({
      "command": "shoot", "geometry": "flat:1",
      "cost": {"type": "time-minimal", "bound": 1.0},
      "boundary": {"q0": [0.0], "v0": [0.0], "q1": [0.0], "v1": [0.0]},
      "shoot": {"multistart": 4, "max_iterations": 20},
      "integrator": {"tol": 1e-12}})";
    CHECK(run_binary("--manifest " + man2.string() + " --out " + dir.string()) == 3);
  }
  SUBCASE("regularized manifest crosses the same data cleanly") {
    const fs::path dir = fresh_dir("exitreg");
    CHECK(run_binary("--manifest " + config("equator_crossing.json") + " --out " +
                     dir.string()) == 0);
    const auto meta = nlohmann::json::parse(slurp(dir / "meta.json"));
    CHECK(meta["lifted_spans"].size() == 1);
  }
}

TEST_CASE("shoot command writes results") {
  const fs::path out = fresh_dir("shoot");
  const RunManifest m = RunManifest::from_file(config("sphere_shoot.json"));
  RunOverrides ov;
  ov.out_dir = out.string();
  ov.threads = 2;
  run_manifest(m, ov);
  const auto res = nlohmann::json::parse(slurp(out / "result.json"));
  CHECK(res["converged"].get<bool>());
  CHECK(res["backend"] == "extrinsic");
  CHECK(res["mismatch"].get<double>() < 1e-8);
  CHECK(fs::exists(out / "trajectory.csv"));

  SUBCASE("time-minimal manifest solves the rest-to-rest transfer") {
    const fs::path out2 = fresh_dir("tmin");
    RunOverrides ov2;
    ov2.out_dir = out2.string();
    run_manifest(RunManifest::from_file(config("tmin_1d.json")), ov2);
    const auto res2 = nlohmann::json::parse(slurp(out2 / "result.json"));
    CHECK(res2["converged"].get<bool>());
    CHECK(res2["T"].get<double>() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-4));
  }
}

TEST_CASE("SPLINELAB_THREADS only sets parallelism, never the output") {
  const fs::path out1 = fresh_dir("thr1"), out2 = fresh_dir("thr2");
  RunManifest m = RunManifest::from_string(R"({
    "command": "poincare",
    "section": {"h": 0.01, "mu": 2.0, "beta": 1.0, "r": 2.0,
                "crossings": 10, "max_time": 100.0,
                "seeds": [[16.0, 0.0], [20.0, 0.0], [24.0, 0.0]]},
    "integrator": {"tol": 1e-13, "hmin": 1e-12, "hmax": 0.02}})");
  const fs::path man = out1 / "section.json";
  std::ofstream(man) << m.doc.dump();
  const std::string envcmd = "SPLINELAB_THREADS=3 " + std::string(SPLINELAB_BIN_PATH) +
                             " --manifest " + man.string() + " --out " + out1.string() +
                             " >/dev/null 2>&1";
  REQUIRE(std::system(envcmd.c_str()) == 0);
  CHECK(run_binary("--manifest " + man.string() + " --threads 1 --out " + out2.string()) == 0);
  CHECK(slurp(out1 / "section.csv") == slurp(out2 / "section.csv"));
  CHECK(slurp(out1 / "section.svg") == slurp(out2 / "section.svg"));
}

TEST_CASE("integrate can drive the combined frame system") {
  const fs::path out = fresh_dir("recon-int");
  RunManifest m = RunManifest::from_string(R"({
    "command": "integrate", "system": "reconstruction",
    "params": {"beta": 1.0, "r": 2.0, "mu": 2.0},
    "initial": {"type": "fixed-point", "branch": -1},
    "time": {"t1": 1.0}, "output": {"points": 50},
    "integrator": {"tol": 1e-13}})");
  RunOverrides ov;
  ov.out_dir = out.string();
  run_manifest(m, ov);
  const std::string csv = slurp(out / "trajectory.csv");
  CHECK(csv.find("t,gx,gy,gz,v,a,theta,phi") != std::string::npos);
  const auto meta = nlohmann::json::parse(slurp(out / "meta.json"));
  CHECK(meta["status"] == "done");
  // the minus-branch equilibrium is stationary too
  for (const auto& d : meta["drift"])
    CHECK(d["max_abs_drift"].get<double>() < 1e-7);
}

TEST_CASE("audit command reports drift") {
  const fs::path out = fresh_dir("audit");
  const RunManifest m = RunManifest::from_file(config("audit_extrinsic.json"));
  RunOverrides ov;
  ov.out_dir = out.string();
  run_manifest(m, ov);
  const auto meta = nlohmann::json::parse(slurp(out / "audit.json"));
  REQUIRE(meta["drift"].size() == 5);
  for (const auto& d : meta["drift"]) {
    if (d["name"] == "H") continue;
    CHECK(d["max_abs_drift"].get<double>() < 1e-8); // constraint drift
  }
}
