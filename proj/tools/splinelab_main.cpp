#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "splinelab/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"splinelab: spline dynamics on Riemannian manifolds"};
  app.set_version_flag("--version", std::string("splinelab ") + splinelab::kVersion);

  std::string manifest_path, out_dir, format, seed_grid;
  int threads = 0;
  app.add_option("--manifest", manifest_path, "run manifest (JSON)")->required();
  app.add_option("--out", out_dir, "output directory (overrides the manifest's out_dir)");
  app.add_option("--format", format, "restrict outputs: csv|json|svg, comma separated");
  app.add_option("--threads", threads, "worker threads (default: SPLINELAB_THREADS or 1)");
  app.add_option("--seed-grid", seed_grid,
                 "Poincare seed grid override, v=min:max:count,z=min:max:count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const splinelab::RunManifest manifest = splinelab::RunManifest::from_file(manifest_path);
    splinelab::RunOverrides overrides;
    overrides.out_dir = out_dir;
    overrides.seed_grid = seed_grid;
    if (!format.empty()) {
      std::istringstream ss(format);
      std::string part;
      while (std::getline(ss, part, ',')) overrides.formats.push_back(part);
    }
    if (threads <= 0) {
      if (const char* env = std::getenv("SPLINELAB_THREADS")) threads = std::atoi(env);
      if (threads <= 0) threads = 1;
    }
    overrides.threads = threads;

    const auto files = splinelab::run_manifest(manifest, overrides);
    for (const auto& f : files) std::cout << f << "\n";
    return 0;
  } catch (const splinelab::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const splinelab::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  }
}
