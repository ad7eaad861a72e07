#include "vds/knn.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vds/error.hpp"
#include "vds/metrics.hpp"
#include "vds/simd.hpp"

namespace vds {

KnnIndex::KnnIndex(const MatrixD& refs, std::span<const std::uint32_t> labels)
    : unit_(refs), labels_(labels.begin(), labels.end()) {
  if (refs.rows() != labels.size())
    throw Error(ErrorCode::ShapeMismatch, "reference rows and labels differ in length");
  for (std::size_t i = 0; i < unit_.rows(); ++i) {
    auto row = unit_.row(i);
    const double n2 = simd::sum_squares(row);
    if (n2 == 0.0) throw Error(ErrorCode::ZeroVector, "reference " + std::to_string(i) + " is zero");
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : row) x *= inv;
  }
}

std::vector<Neighbor> KnnIndex::nearest(std::span<const double> query, std::size_t k,
                                        std::optional<std::size_t> exclude) const {
  const std::size_t available = size() - (exclude && *exclude < size() ? 1 : 0);
  if (k == 0 || k > available)
    throw Error(ErrorCode::InvalidArgument, "k=" + std::to_string(k) + " with " +
                                                std::to_string(available) + " references");
  if (query.size() != unit_.cols()) throw Error(ErrorCode::ShapeMismatch, "query size != d");
  const double qn2 = simd::sum_squares(query);
  if (qn2 == 0.0) throw Error(ErrorCode::ZeroVector, "zero query");
  const double q_inv = 1.0 / std::sqrt(qn2);

  std::vector<double> dots(size());
  simd::active().row_dots(unit_.data(), unit_.rows(), unit_.cols(), query.data(), dots.data());
  std::vector<Neighbor> all;
  all.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    if (exclude && *exclude == i) continue;
    all.push_back({i, 1.0 - std::clamp(dots[i] * q_inv, -1.0, 1.0)});
  }
  const auto closer = [](const Neighbor& x, const Neighbor& y) {
    return x.distance < y.distance || (x.distance == y.distance && x.index < y.index);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  return all;
}

std::uint32_t KnnIndex::predict(std::span<const double> query, const KnnConfig& cfg) const {
  struct Tally {
    std::size_t votes = 0;
    double distance = 0.0;
  };
  std::map<std::uint32_t, Tally> tally;
  for (const auto& n : nearest(query, cfg.k)) {
    auto& t = tally[labels_[n.index]];
    ++t.votes;
    t.distance += n.distance;
  }
  // std::map iterates class ids in increasing order, so strict comparisons
  // leave the lowest id in place on a full tie.
  std::uint32_t best = tally.begin()->first;
  Tally best_tally = tally.begin()->second;
  for (const auto& [label, t] : tally) {
    const double mean = t.distance / static_cast<double>(t.votes);
    const double best_mean = best_tally.distance / static_cast<double>(best_tally.votes);
    if (t.votes > best_tally.votes || (t.votes == best_tally.votes && mean < best_mean)) {
      best = label;
      best_tally = t;
    }
  }
  return best;
}

std::uint32_t knn_predict(std::span<const double> query, const MatrixD& ref_reps,
                          std::span<const std::uint32_t> ref_labels, const KnnConfig& cfg) {
  return KnnIndex(ref_reps, ref_labels).predict(query, cfg);
}

KnnScore knn_eval(const ReprBundle& bundle, const MatrixD& train_reps, const MatrixD& test_reps,
                  const KnnConfig& cfg) {
  if (test_reps.rows() != bundle.n_test() || train_reps.rows() != bundle.n_train())
    throw Error(ErrorCode::ShapeMismatch, "representations do not match the bundle splits");
  const KnnIndex index(train_reps, bundle.train_labels);
  std::vector<std::uint32_t> pred(test_reps.rows());
  for (std::size_t i = 0; i < test_reps.rows(); ++i) pred[i] = index.predict(test_reps.row(i), cfg);
  return {cfg.k, accuracy(pred, bundle.test_labels),
          macro_f1(pred, bundle.test_labels, bundle.n_classes)};
}

double sibling_rate(const MatrixD& reps, std::span<const std::uint32_t> labels, std::size_t k) {
  if (k >= reps.rows())
    throw Error(ErrorCode::InvalidArgument, "sibling rate needs k < number of samples");
  const KnnIndex index(reps, labels);
  double total = 0.0;
  for (std::size_t i = 0; i < reps.rows(); ++i) {
    std::size_t same = 0;
    for (const auto& n : index.nearest(reps.row(i), k, i)) same += labels[n.index] == labels[i];
    total += static_cast<double>(same) / static_cast<double>(k);
  }
  return total / static_cast<double>(reps.rows());
}

}  // namespace vds
