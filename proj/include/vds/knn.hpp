#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vds/matrix.hpp"
#include "vds/repr_store.hpp"

namespace vds {

enum class KnnMetric { CosineDistance };  // 1 - cosine

struct KnnConfig {
  std::size_t k = 1;
  KnnMetric metric = KnnMetric::CosineDistance;
};

struct Neighbor {
  std::size_t index;
  double distance;
};

/// Exact nearest-neighbor search over unit-normalized reference rows.
class KnnIndex {
 public:
  KnnIndex(const MatrixD& refs, std::span<const std::uint32_t> labels);

  std::size_t size() const { return unit_.rows(); }

  /// The k closest references ordered by (distance, index), optionally skipping one row.
  std::vector<Neighbor> nearest(std::span<const double> query, std::size_t k,
                                std::optional<std::size_t> exclude = std::nullopt) const;

  /// Majority vote among the k nearest; vote ties go to the smaller mean
  /// distance, then to the lower class id.
  std::uint32_t predict(std::span<const double> query, const KnnConfig& cfg) const;

  std::uint32_t label(std::size_t i) const { return labels_[i]; }

 private:
  MatrixD unit_;
  std::vector<std::uint32_t> labels_;
};

std::uint32_t knn_predict(std::span<const double> query, const MatrixD& ref_reps,
                          std::span<const std::uint32_t> ref_labels, const KnnConfig& cfg);

struct KnnScore {
  std::size_t k = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// Classifies every test row against the train rows.
KnnScore knn_eval(const ReprBundle& bundle, const MatrixD& train_reps, const MatrixD& test_reps,
                  const KnnConfig& cfg);

/// Mean over samples of the fraction of their k nearest neighbors (self
/// excluded) that share their label.
double sibling_rate(const MatrixD& reps, std::span<const std::uint32_t> labels, std::size_t k);

}  // namespace vds
