#include "vds/metrics.hpp"

#include <map>
#include <utility>
#include <vector>

#include "vds/error.hpp"

namespace vds {

namespace {

void require_same_length(Labels a, Labels b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::ShapeMismatch, "label vectors differ in length");
  if (a.empty()) throw Error(ErrorCode::InvalidArgument, "label vectors are empty");
}

double pairs(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double accuracy(Labels pred, Labels truth) {
  require_same_length(pred, truth);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double macro_f1(Labels pred, Labels truth, std::size_t n_classes) {
  require_same_length(pred, truth);
  if (n_classes == 0) throw Error(ErrorCode::InvalidArgument, "n_classes must be positive");
  std::vector<std::size_t> tp(n_classes), predicted(n_classes), actual(n_classes);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= n_classes || truth[i] >= n_classes)
      throw Error(ErrorCode::InvalidArgument, "label out of range for macro-F1");
    ++predicted[pred[i]];
    ++actual[truth[i]];
    if (pred[i] == truth[i]) ++tp[pred[i]];
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    // 2PR/(P+R) == 2tp / (predicted + actual); zero when tp == 0.
    const std::size_t denom = predicted[c] + actual[c];
    if (tp[c] > 0) sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
  }
  return sum / static_cast<double>(n_classes);
}

double ari(Labels a, Labels b) {
  require_same_length(a, b);
  if (a.size() < 2) throw Error(ErrorCode::InvalidArgument, "ARI needs at least two samples");

  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> table;
  std::map<std::uint32_t, std::size_t> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++table[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [key, n] : table) index += pairs(static_cast<double>(n));
  for (const auto& [key, n] : rows) sum_rows += pairs(static_cast<double>(n));
  for (const auto& [key, n] : cols) sum_cols += pairs(static_cast<double>(n));

  const double expected = sum_rows * sum_cols / pairs(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sum_rows + sum_cols);
  const double denom = max_index - expected;
  if (denom == 0.0) return (index == sum_rows && index == sum_cols) ? 1.0 : 0.0;
  return (index - expected) / denom;
}

}  // namespace vds
