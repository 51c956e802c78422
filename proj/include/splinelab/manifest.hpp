#ifndef SPLINELAB_MANIFEST_HPP
#define SPLINELAB_MANIFEST_HPP

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "splinelab/types.hpp"

namespace splinelab {

/// A declarative run description loaded from JSON. Field access helpers
/// throw InputError with the offending key path, which the CLI maps to
/// exit code 2.
struct RunManifest {
  nlohmann::json doc;
  std::string source_path;   // empty for in-memory manifests
  std::string hash;          // fnv1a-64 of the manifest bytes

  static RunManifest from_file(const std::string& path);
  static RunManifest from_string(const std::string& text, const std::string& name = "<inline>");

  std::string command() const;
  std::string out_dir(const std::string& fallback) const;
};

/// Command-line overrides that sit on top of the manifest.
struct RunOverrides {
  std::string out_dir;                 // --out
  std::vector<std::string> formats;    // --format (empty = all)
  int threads = 0;                     // --threads / SPLINELAB_THREADS; 0 = 1
  std::string seed_grid;               // --seed-grid "v=min:max:count,z=min:max:count"
};

/// FNV-1a 64-bit over a byte string, hex-encoded.
std::string fnv1a_hex(const std::string& bytes);

} // namespace splinelab

#endif
