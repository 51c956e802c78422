#include "splinelab/manifest.hpp"

#include <fstream>
#include <sstream>

namespace splinelab {

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunManifest RunManifest::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("manifest: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  RunManifest m = from_string(buf.str(), path);
  m.source_path = path;
  return m;
}

RunManifest RunManifest::from_string(const std::string& text, const std::string& name) {
  RunManifest m;
  m.hash = fnv1a_hex(text);
  m.source_path = name;
  try {
    m.doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("manifest " + name + ": " + e.what());
  }
  if (!m.doc.is_object()) throw InputError("manifest " + name + ": top level must be an object");
  return m;
}

std::string RunManifest::command() const {
  if (!doc.contains("command") || !doc["command"].is_string())
    throw InputError("manifest: missing string field 'command'");
  return doc["command"].get<std::string>();
}

std::string RunManifest::out_dir(const std::string& fallback) const {
  if (doc.contains("out_dir")) {
    if (!doc["out_dir"].is_string()) throw InputError("manifest: 'out_dir' must be a string");
    return doc["out_dir"].get<std::string>();
  }
  return fallback;
}

} // namespace splinelab
