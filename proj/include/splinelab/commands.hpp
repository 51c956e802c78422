#ifndef SPLINELAB_COMMANDS_HPP
#define SPLINELAB_COMMANDS_HPP

#include <string>
#include <vector>

#include "splinelab/manifest.hpp"

namespace splinelab {

/// Execute the manifest's command and write its outputs. Returns the paths
/// written. Throws InputError for bad manifests (exit 2 at the CLI) and
/// Error for numerical failures (exit 3); outputs produced before a
/// numerical failure are kept on disk.
std::vector<std::string> run_manifest(const RunManifest& manifest, const RunOverrides& overrides);

/// Atomic file write (temp file + rename in the target directory).
void write_file_atomic(const std::string& path, const std::string& content);

} // namespace splinelab

#endif
