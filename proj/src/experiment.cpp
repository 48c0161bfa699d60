#include "mjsq/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mjsq {

namespace {

std::string digest_to_hex(const unsigned char* md, unsigned int len) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256: digest failed");
  return digest_to_hex(md, len);
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("sha256_file: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

std::string canonical_config(const std::map<std::string, std::string>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) {  // std::map iterates in key order
    out += trim(k);
    out += '=';
    out += trim(v);
    out += '\n';
  }
  return out;
}

std::string config_hash(const std::map<std::string, std::string>& kv) {
  return sha256_hex(canonical_config(kv));
}

std::string utc_now_iso8601() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string write_manifest(const std::string& dir, const Manifest& manifest) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment_id"] = manifest.experiment_id;
  j["config_hash"] = manifest.config_hash;
  j["toolkit_version"] = manifest.toolkit_version;
  j["seed"] = manifest.seed;
  j["created_utc"] = manifest.created_utc;
  j["config"] = manifest.config;
  nlohmann::json arts = nlohmann::json::array();
  for (const auto& [path, digest] : manifest.artifacts)
    arts.push_back({{"path", path}, {"sha256", digest}});
  j["artifacts"] = arts;

  std::filesystem::create_directories(dir);
  const std::string path =
      (std::filesystem::path(dir) / (manifest.experiment_id + ".manifest.json")).string();
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write_manifest: cannot write " + path);
  return path;
}

std::vector<std::string> verify_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw std::runtime_error("verify_manifest: cannot open " + manifest_path);
  nlohmann::json j;
  in >> j;
  std::vector<std::string> problems;
  const auto base = std::filesystem::path(manifest_path).parent_path();

  if (j.contains("config") && j.contains("config_hash")) {
    std::map<std::string, std::string> kv = j["config"].get<std::map<std::string, std::string>>();
    if (config_hash(kv) != j["config_hash"].get<std::string>())
      problems.push_back("config hash mismatch");
  }
  for (const auto& art : j["artifacts"]) {
    const std::string rel = art["path"].get<std::string>();
    const std::string want = art["sha256"].get<std::string>();
    const auto full = base / rel;
    try {
      if (sha256_file(full.string()) != want) problems.push_back(rel + ": digest mismatch");
    } catch (const std::exception&) {
      problems.push_back(rel + ": missing");
    }
  }
  return problems;
}

TableWriter::TableWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {
  columns_.insert(columns_.begin(), "schema_version");
}

void TableWriter::add_row(const std::vector<std::string>& cells) {
  if (cells.size() + 1 != columns_.size())
    throw std::invalid_argument("TableWriter: column count mismatch");
  std::vector<std::string> row;
  row.reserve(columns_.size());
  row.push_back(std::to_string(kSchemaVersion));
  row.insert(row.end(), cells.begin(), cells.end());
  rows_.push_back(std::move(row));
}

std::string TableWriter::fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string TableWriter::fmt(std::int64_t v) { return std::to_string(v); }

std::string TableWriter::csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) out += ',';
    out += columns_[i];
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

void TableWriter::write_csv(const std::string& dir, const std::string& name,
                            Manifest& manifest) const {
  write_text_artifact(dir, name, csv(), manifest);
}

void write_text_artifact(const std::string& dir, const std::string& name,
                         const std::string& content, Manifest& manifest) {
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / name).string();
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("write_text_artifact: cannot write " + path);
  out.close();
  manifest.artifacts.emplace_back(name, sha256_hex(content));
}

}  // namespace mjsq
