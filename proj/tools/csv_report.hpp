#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vds::cli {

/// Rows of (stage, mode, k, metric, value). The run manifest is embedded as
/// rows with stage "manifest" ahead of the results.
class CsvReport {
 public:
  void manifest(const std::string& key, const std::string& value);
  void add(const std::string& stage, const std::string& mode, const std::string& k,
           const std::string& metric, double value);
  void add_text(const std::string& stage, const std::string& mode, const std::string& k,
                const std::string& metric, const std::string& value);

  std::string str() const;
  /// Writes to path, or to stdout when path is empty.
  void emit(const std::filesystem::path& path) const;

 private:
  std::vector<std::vector<std::string>> rows_;
};

std::string format_number(double value);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace vds::cli
