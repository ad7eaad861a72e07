#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vds/matrix.hpp"

namespace vds {

/// verbalizer[c] lists the vocabulary token ids spelling class c's label.
using Verbalizer = std::vector<std::vector<std::uint32_t>>;

/// Exported language-model representations plus the LM head that produced
/// them. Immutable after load; every numeric block is f32 as on disk.
struct ReprBundle {
  std::size_t d = 0;
  std::size_t v = 0;
  std::size_t n_classes = 0;
  std::vector<std::string> class_names;
  Verbalizer verbalizer;
  MatrixF lm_head;  // d x v
  MatrixF train_reps;
  std::vector<std::uint32_t> train_labels;
  MatrixF test_reps;
  std::vector<std::uint32_t> test_labels;

  std::size_t n_train() const { return train_labels.size(); }
  std::size_t n_test() const { return test_labels.size(); }

  bool operator==(const ReprBundle&) const = default;
};

struct Violation {
  std::string code;  // machine-readable, e.g. "LabelOutOfRange"
  std::string detail;
};

/// Every invariant violation, at most one per (code, field). Empty means valid.
std::vector<Violation> validate_bundle(const ReprBundle& bundle);

inline constexpr char kBundleMagic[4] = {'V', 'D', 'S', 'R'};
inline constexpr std::uint32_t kBundleVersion = 1;

std::string encode_bundle(const ReprBundle& bundle);
ReprBundle decode_bundle(const std::string& bytes);

void write_bundle(const ReprBundle& bundle, const std::filesystem::path& path);
ReprBundle read_bundle(const std::filesystem::path& path);

struct SynthSpec {
  std::uint64_t seed = 42;
  std::size_t d = 64;
  std::size_t v = 200;
  std::size_t n_classes = 5;
  std::size_t n_train = 1000;
  std::size_t n_test = 200;
  double noise_sigma = 0.1;
  bool mix = true;
};

/// Deterministic fixture: Gaussian LM head, one distinct verbalizer token per
/// class, and samples r = A * s_t + noise around each class's semantic basis.
/// A is I + 0.5 G (G Gaussian, cond(A) <= 1e3) when mix is set, else I.
ReprBundle gen_synthetic(const SynthSpec& spec);

}  // namespace vds
