#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace smoothstyle::report {

// Serialized record of one metric evaluation. Deliberately carries no
// wall-clock fields: re-running with the stored seed and parameters must
// reproduce the file byte for byte.
struct MetricReport {
  std::string metric;
  nlohmann::json protocol;  // sample counts, T, strategy, kind, ...
  std::uint64_t seed = 0;
  std::string backend;       // backend identity string
  std::string backend_hash;  // content hash of the weight file, if any
  nlohmann::json results;    // scalar results and breakdowns

  nlohmann::json to_json() const;
  std::string to_text() const;  // pretty JSON, trailing newline
  void save(const std::filesystem::path& path) const;
};

// Writes rows as CSV; the header defines the column order.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

std::string sha256_hex(const void* bytes, std::size_t len);
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace smoothstyle::report
