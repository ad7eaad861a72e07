#include "csv_report.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <iostream>
#include <memory>

#include "vds/byte_io.hpp"

namespace vds::cli {

namespace {

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void CsvReport::manifest(const std::string& key, const std::string& value) {
  rows_.push_back({"manifest", "", "", key, value});
}

void CsvReport::add(const std::string& stage, const std::string& mode, const std::string& k,
                    const std::string& metric, double value) {
  rows_.push_back({stage, mode, k, metric, format_number(value)});
}

void CsvReport::add_text(const std::string& stage, const std::string& mode, const std::string& k,
                         const std::string& metric, const std::string& value) {
  rows_.push_back({stage, mode, k, metric, value});
}

std::string CsvReport::str() const {
  std::string out = "stage,mode,k,metric,value\n";
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += quote(row[i]);
    }
    out += '\n';
  }
  return out;
}

void CsvReport::emit(const std::filesystem::path& path) const {
  if (path.empty()) {
    std::cout << str();
    std::cout.flush();
  } else {
    byte_io::write_file(path, str());
  }
}

std::string sha256_file(const std::filesystem::path& path) {
  const std::string bytes = byte_io::read_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx.get(), digest, &length);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xf];
  }
  return hex;
}

}  // namespace vds::cli
