#include <Eigen/SVD>
#include <cmath>
#include <numeric>

#include "vds/error.hpp"
#include "vds/repr_store.hpp"
#include "vds/rng.hpp"
#include "vds/semantic_basis.hpp"

namespace vds {

namespace {

constexpr double kMixScale = 0.5;
constexpr double kMaxMixCondition = 1e3;

void validate_spec(const SynthSpec& s) {
  if (s.d < 2) throw Error(ErrorCode::InvalidArgument, "synthetic d must be >= 2");
  if (s.v == 0 || s.n_classes == 0 || s.n_train == 0 || s.n_test == 0)
    throw Error(ErrorCode::InvalidArgument, "synthetic sizes must be positive");
  if (s.n_classes > s.v) throw Error(ErrorCode::InvalidArgument, "n_classes must be <= v");
  if (!(s.noise_sigma >= 0.0) || !std::isfinite(s.noise_sigma))
    throw Error(ErrorCode::InvalidArgument, "noise_sigma must be finite and >= 0");
}

double condition_number(const MatrixD& a) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> m(a.data(), static_cast<Eigen::Index>(a.rows()),
                               static_cast<Eigen::Index>(a.cols()));
  Eigen::JacobiSVD<RowMajor> svd(m);
  const auto& s = svd.singularValues();
  const double smallest = s(s.size() - 1);
  return smallest > 0.0 ? s(0) / smallest : INFINITY;
}

MatrixD mixing_matrix(Rng& rng, std::size_t d) {
  for (;;) {
    MatrixD a = MatrixD::identity(d);
    for (double& x : a.values()) x += kMixScale * rng.normal();
    if (condition_number(a) <= kMaxMixCondition) return a;
  }
}

void sample_split(Rng& rng, const SynthSpec& spec,
                  const std::vector<std::vector<double>>& centers, MatrixF& reps,
                  std::vector<std::uint32_t>& labels, std::size_t n) {
  reps = MatrixF(n, spec.d);
  labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::uint32_t>(rng.below(spec.n_classes));
    labels[i] = c;
    auto row = reps.row(i);
    for (std::size_t j = 0; j < spec.d; ++j) {
      const double x = centers[c][j] + spec.noise_sigma * rng.normal();
      row[j] = static_cast<float>(x);
    }
  }
}

}  // namespace

ReprBundle gen_synthetic(const SynthSpec& spec) {
  validate_spec(spec);
  Rng rng(spec.seed);

  ReprBundle b;
  b.d = spec.d;
  b.v = spec.v;
  b.n_classes = spec.n_classes;
  b.lm_head = MatrixF(spec.d, spec.v);
  for (float& x : b.lm_head.values()) x = static_cast<float>(rng.normal());

  const SemanticBases bases = head_bases(b);

  // Partial Fisher-Yates: the first n_classes entries become the class tokens.
  std::vector<std::uint32_t> vocab(spec.v);
  std::iota(vocab.begin(), vocab.end(), 0u);
  for (std::size_t i = 0; i < spec.n_classes; ++i) {
    const auto j = i + rng.below(spec.v - i);
    std::swap(vocab[i], vocab[j]);
  }
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    b.class_names.push_back("class" + std::to_string(c));
    b.verbalizer.push_back({vocab[c]});
  }

  const MatrixD mix = spec.mix ? mixing_matrix(rng, spec.d) : MatrixD::identity(spec.d);

  // Class centers A * s_t, computed once.
  std::vector<std::vector<double>> centers(spec.n_classes, std::vector<double>(spec.d, 0.0));
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    const auto basis = bases.row(b.verbalizer[c].front());
    for (std::size_t i = 0; i < spec.d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < spec.d; ++j) s += mix(i, j) * basis[j];
      centers[c][i] = s;
    }
  }

  sample_split(rng, spec, centers, b.train_reps, b.train_labels, spec.n_train);
  sample_split(rng, spec, centers, b.test_reps, b.test_labels, spec.n_test);
  return b;
}

}  // namespace vds
