#include "vds/repr_store.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "json.hpp"
#include "vds/byte_io.hpp"
#include "vds/error.hpp"

namespace vds {

namespace byte_io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::Io, "read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

}  // namespace byte_io

namespace {

using nlohmann::json;

bool all_finite(const MatrixF& m) {
  for (float x : m.values())
    if (!std::isfinite(x)) return false;
  return true;
}

void check_matrix(std::vector<Violation>& out, const char* field, const MatrixF& m,
                  std::size_t rows, std::size_t cols) {
  if (m.rows() != rows || m.cols() != cols)
    out.push_back({"ShapeMismatch", std::string(field) + " is " + std::to_string(m.rows()) + "x" +
                                        std::to_string(m.cols()) + ", expected " +
                                        std::to_string(rows) + "x" + std::to_string(cols)});
  if (!all_finite(m)) out.push_back({"NonFinite", std::string(field) + " has NaN or Inf"});
}

void check_split(std::vector<Violation>& out, const char* name, const MatrixF& reps,
                 const std::vector<std::uint32_t>& labels, std::size_t d, std::size_t n_classes) {
  const std::string field = name;
  if (labels.empty()) out.push_back({"EmptySplit", field + " has no samples"});
  check_matrix(out, (field + "_reps").c_str(), reps, labels.size(), d);
  std::size_t bad = 0;
  for (auto label : labels)
    if (label >= n_classes) ++bad;
  if (bad > 0)
    out.push_back({"LabelOutOfRange",
                   field + "_labels: " + std::to_string(bad) + " labels >= n_classes"});
}

void put_matrix(std::string& out, const MatrixF& m) {
  for (float x : m.values()) byte_io::put_f32(out, x);
}

MatrixF get_matrix(byte_io::Reader& in, std::size_t rows, std::size_t cols, const char* what) {
  MatrixF m(rows, cols);
  for (float& x : m.values()) x = in.f32(what);
  return m;
}

std::vector<std::uint32_t> get_labels(byte_io::Reader& in, std::size_t n, const char* what) {
  std::vector<std::uint32_t> labels(n);
  for (auto& x : labels) x = in.u32(what);
  return labels;
}

ErrorCode error_for(const Violation& v) {
  if (v.code == "NonFinite") return ErrorCode::NonFinite;
  if (v.code == "ShapeMismatch" || v.code == "ClassNamesLength" || v.code == "VerbalizerLength")
    return ErrorCode::ShapeMismatch;
  return ErrorCode::InvalidBundle;
}

std::size_t checked_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a)
    throw Error(ErrorCode::BadHeader, "declared dimensions overflow");
  return a * b;
}

}  // namespace

std::vector<Violation> validate_bundle(const ReprBundle& b) {
  std::vector<Violation> out;
  if (b.d == 0 || b.v == 0 || b.n_classes == 0)
    out.push_back({"EmptyDimension", "d, v and n_classes must be positive"});
  if (b.class_names.size() != b.n_classes)
    out.push_back({"ClassNamesLength", std::to_string(b.class_names.size()) +
                                           " class names for " + std::to_string(b.n_classes) +
                                           " classes"});
  if (b.verbalizer.size() != b.n_classes)
    out.push_back({"VerbalizerLength", "verbalizer covers " + std::to_string(b.verbalizer.size()) +
                                           " classes, expected " + std::to_string(b.n_classes)});
  for (std::size_t c = 0; c < b.verbalizer.size(); ++c) {
    const auto& tokens = b.verbalizer[c];
    if (tokens.empty())
      out.push_back({"VerbalizerMissingClass", "class " + std::to_string(c) + " has no tokens"});
    for (auto t : tokens) {
      if (t >= b.v) {
        out.push_back({"TokenOutOfRange", "class " + std::to_string(c) + " token " +
                                              std::to_string(t) + " >= v"});
        break;
      }
    }
  }
  check_matrix(out, "lm_head", b.lm_head, b.d, b.v);
  check_split(out, "train", b.train_reps, b.train_labels, b.d, b.n_classes);
  check_split(out, "test", b.test_reps, b.test_labels, b.d, b.n_classes);
  return out;
}

std::string encode_bundle(const ReprBundle& b) {
  if (auto violations = validate_bundle(b); !violations.empty())
    throw Error(ErrorCode::InvalidBundle, violations.front().code + ": " + violations.front().detail);

  json verbalizer = json::object();
  for (std::size_t c = 0; c < b.verbalizer.size(); ++c)
    verbalizer[std::to_string(c)] = b.verbalizer[c];
  const json header = {
      {"d", b.d},
      {"v", b.v},
      {"n_classes", b.n_classes},
      {"class_names", b.class_names},
      {"verbalizer", verbalizer},
      {"n_train", b.n_train()},
      {"n_test", b.n_test()},
      {"dtype", "f32"},
      {"layout", "row-major"},
  };
  const std::string header_text = header.dump();

  std::string out(kBundleMagic, 4);
  byte_io::put_u32(out, kBundleVersion);
  byte_io::put_u64(out, header_text.size());
  out += header_text;
  put_matrix(out, b.lm_head);
  put_matrix(out, b.train_reps);
  for (auto label : b.train_labels) byte_io::put_u32(out, label);
  put_matrix(out, b.test_reps);
  for (auto label : b.test_labels) byte_io::put_u32(out, label);
  return out;
}

ReprBundle decode_bundle(const std::string& bytes) {
  byte_io::Reader in(bytes);
  const std::string magic = in.take(4, "magic");
  if (magic != std::string(kBundleMagic, 4)) throw Error(ErrorCode::BadMagic, "not a VDSR file");
  const auto version = in.u32("version");
  if (version != kBundleVersion)
    throw Error(ErrorCode::UnsupportedVersion, "VDSR version " + std::to_string(version));
  const auto header_len = in.u64("header length");
  if (header_len > in.remaining()) throw Error(ErrorCode::Truncated, "file ends inside header");
  const std::string header_text = in.take(static_cast<std::size_t>(header_len), "header");

  ReprBundle b;
  std::size_t n_train = 0, n_test = 0;
  try {
    const json header = json::parse(header_text);
    if (header.at("dtype") != "f32" || header.at("layout") != "row-major")
      throw Error(ErrorCode::BadHeader, "only f32 row-major payloads are supported");
    b.d = header.at("d").get<std::size_t>();
    b.v = header.at("v").get<std::size_t>();
    b.n_classes = header.at("n_classes").get<std::size_t>();
    b.class_names = header.at("class_names").get<std::vector<std::string>>();
    n_train = header.at("n_train").get<std::size_t>();
    n_test = header.at("n_test").get<std::size_t>();
    b.verbalizer.assign(b.n_classes, {});
    for (const auto& [key, tokens] : header.at("verbalizer").items()) {
      std::size_t pos = 0;
      const unsigned long c = std::stoul(key, &pos);
      if (pos != key.size() || c >= b.n_classes)
        throw Error(ErrorCode::BadHeader, "verbalizer key '" + key + "' is not a class id");
      b.verbalizer[c] = tokens.get<std::vector<std::uint32_t>>();
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::BadHeader, e.what());
  }

  const std::size_t floats = checked_mul(b.d, b.v) + checked_mul(n_train, b.d) +
                             checked_mul(n_test, b.d);
  const std::size_t payload = checked_mul(floats + n_train + n_test, 4);
  if (in.remaining() < payload)
    throw Error(ErrorCode::Truncated, "payload has " + std::to_string(in.remaining()) +
                                          " bytes, header declares " + std::to_string(payload));
  if (in.remaining() > payload)
    throw Error(ErrorCode::ShapeMismatch, std::to_string(in.remaining() - payload) +
                                              " trailing bytes after declared payload");

  b.lm_head = get_matrix(in, b.d, b.v, "lm_head");
  b.train_reps = get_matrix(in, n_train, b.d, "train_reps");
  b.train_labels = get_labels(in, n_train, "train_labels");
  b.test_reps = get_matrix(in, n_test, b.d, "test_reps");
  b.test_labels = get_labels(in, n_test, "test_labels");

  if (auto violations = validate_bundle(b); !violations.empty()) {
    const auto& first = violations.front();
    throw Error(error_for(first), first.code + ": " + first.detail);
  }
  return b;
}

void write_bundle(const ReprBundle& bundle, const std::filesystem::path& path) {
  byte_io::write_file(path, encode_bundle(bundle));
}

ReprBundle read_bundle(const std::filesystem::path& path) {
  return decode_bundle(byte_io::read_file(path));
}

}  // namespace vds
