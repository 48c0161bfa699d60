#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace mjsq {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolkitVersion = "0.1.0";

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

// Canonical form of a flat key-value configuration: keys sorted, whitespace
// trimmed, one key=value per line. Hash of this string identifies the run.
std::string canonical_config(const std::map<std::string, std::string>& kv);
std::string config_hash(const std::map<std::string, std::string>& kv);

struct Manifest {
  std::string experiment_id;
  std::string config_hash;
  std::string toolkit_version = kToolkitVersion;
  std::uint64_t seed = 0;
  std::string created_utc;                                     // metadata only
  std::map<std::string, std::string> config;                   // canonical source
  std::vector<std::pair<std::string, std::string>> artifacts;  // path, sha256
};

// Writes <dir>/<id>.manifest.json and returns its path.
std::string write_manifest(const std::string& dir, const Manifest& manifest);

// Recomputes every artifact digest; returns a list of mismatches (empty on
// success). Paths in the manifest are relative to its directory.
std::vector<std::string> verify_manifest(const std::string& manifest_path);

// Table writer with stable numeric formatting; emits CSV with a
// schema_version column and registers the file in the manifest.
class TableWriter {
 public:
  TableWriter(std::vector<std::string> columns);
  void add_row(const std::vector<std::string>& cells);
  static std::string fmt(double v);
  static std::string fmt(std::int64_t v);
  std::string csv() const;
  void write_csv(const std::string& dir, const std::string& name, Manifest& manifest) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

void write_text_artifact(const std::string& dir, const std::string& name,
                         const std::string& content, Manifest& manifest);

std::string utc_now_iso8601();

}  // namespace mjsq
