#pragma once

// key=value text manifests and little-endian f64 blobs shared by the model
// formats.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tsc::detail {

/// Shortest round-trip decimal form.
std::string format_double(double v);

class Manifest {
 public:
  void add(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }
  void add(const std::string& key, std::uint64_t value) { add(key, std::to_string(value)); }
  void add(const std::string& key, double value) { add(key, format_double(value)); }

  /// Last value of a key; ParseError when missing.
  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const;
  std::vector<std::string> all(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  double f64(const std::string& key) const;

  void write(const std::filesystem::path& path) const;
  static Manifest read(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

double parse_double(const std::string& s, const std::string& what);

/// `<manifest>.bin`
std::filesystem::path blob_path(const std::filesystem::path& manifest);
void write_blob(const std::filesystem::path& path, std::span<const double> values);
/// Throws IntegrityError unless the blob holds exactly `count` values.
std::vector<double> read_blob(const std::filesystem::path& path, std::size_t count);

}  // namespace tsc::detail
