#include "vds/semantic_logits.hpp"

#include <algorithm>
#include <cmath>

#include "vds/error.hpp"
#include "vds/simd.hpp"

namespace vds {

std::string_view to_string(LogitsMode mode) {
  switch (mode) {
    case LogitsMode::SimAll: return "sim-all";
    case LogitsMode::MatMul: return "mat-mul";
    case LogitsMode::SimGT: return "sim-gt";
    case LogitsMode::SimAllExp: return "sim-all-exp";
    case LogitsMode::MatMulExp: return "mat-mul-exp";
  }
  return "unknown";
}

std::optional<LogitsMode> parse_logits_mode(std::string_view name) {
  for (auto mode : kAllModes)
    if (to_string(mode) == name) return mode;
  return std::nullopt;
}

bool is_similarity(LogitsMode mode) {
  return mode == LogitsMode::SimAll || mode == LogitsMode::SimAllExp || mode == LogitsMode::SimGT;
}

bool is_exp(LogitsMode mode) {
  return mode == LogitsMode::SimAllExp || mode == LogitsMode::MatMulExp;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "cosine of unequal lengths");
  const double na = simd::sum_squares(a);
  const double nb = simd::sum_squares(b);
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  const double c = simd::dot(a, b) / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

std::vector<double> sim_logits(std::span<const double> r, const SemanticBases& bases) {
  if (r.size() != bases.dim()) throw Error(ErrorCode::ShapeMismatch, "representation size != d");
  const double rn2 = simd::sum_squares(r);
  if (rn2 == 0.0) throw Error(ErrorCode::ZeroVector, "zero representation");
  const double rn = std::sqrt(rn2);

  std::vector<double> logits(bases.vocab());
  const auto& k = simd::active();
  k.row_dots(bases.bases.data(), bases.vocab(), bases.dim(), r.data(), logits.data());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double bn2 = simd::sum_squares(bases.row(i));
    if (bn2 == 0.0)
      throw Error(ErrorCode::ZeroVector, "semantic basis " + std::to_string(i) + " is zero");
    logits[i] = std::clamp(logits[i] / (std::sqrt(bn2) * rn), -1.0, 1.0);
  }
  return logits;
}

std::vector<double> mm_logits(std::span<const double> r, const MatrixD& w) {
  if (r.size() != w.rows()) throw Error(ErrorCode::ShapeMismatch, "representation size != d");
  std::vector<double> logits(w.cols());
  simd::active().vec_mat(r.data(), w.data(), w.rows(), w.cols(), logits.data());
  return logits;
}

std::vector<double> exp_transform(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

ProbDist to_probs(std::span<const double> logits, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be positive");
  std::vector<double> scaled(logits.begin(), logits.end());
  for (double& x : scaled) x *= tau;
  return {exp_transform(scaled), tau};
}

ClassScorer::ClassScorer(const ReprBundle& bundle, const SemanticBases& bases, LogitsMode mode,
                         VerbalizerAggregation aggregation)
    : mode_(mode), targets_(bundle.n_classes, bundle.d) {
  if (mode == LogitsMode::SimGT)
    throw Error(ErrorCode::InvalidMode, "sim-gt needs ground truth and cannot predict");
  for (std::size_t c = 0; c < bundle.n_classes; ++c) {
    auto target = targets_.row(c);
    if (is_similarity(mode)) {
      const auto basis = class_basis(bases, bundle.verbalizer, c, aggregation);
      const double n2 = simd::sum_squares(basis);
      if (n2 == 0.0) throw Error(ErrorCode::ZeroVector, "class basis " + std::to_string(c));
      const double inv = 1.0 / std::sqrt(n2);
      for (std::size_t j = 0; j < target.size(); ++j) target[j] = basis[j] * inv;
    } else {
      // mean over tokens of (r . W)[t] == r . mean_t W[:, t]
      const auto& tokens = bundle.verbalizer.at(c);
      if (tokens.empty()) throw Error(ErrorCode::UnknownClass, "class " + std::to_string(c));
      const double scale = 1.0 / static_cast<double>(tokens.size());
      for (auto t : tokens)
        for (std::size_t j = 0; j < target.size(); ++j)
          target[j] += scale * static_cast<double>(bundle.lm_head(j, t));
    }
  }
}

std::vector<double> ClassScorer::raw_scores(std::span<const double> r) const {
  if (r.size() != targets_.cols()) throw Error(ErrorCode::ShapeMismatch, "representation size != d");
  std::vector<double> s(targets_.rows());
  simd::active().row_dots(targets_.data(), targets_.rows(), targets_.cols(), r.data(), s.data());
  if (is_similarity(mode_)) {
    const double n2 = simd::sum_squares(r);
    if (n2 == 0.0) throw Error(ErrorCode::ZeroVector, "zero representation");
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : s) x = std::clamp(x * inv, -1.0, 1.0);
  }
  return s;
}

std::vector<double> ClassScorer::scores(std::span<const double> r) const {
  auto s = raw_scores(r);
  return is_exp(mode_) ? exp_transform(s) : s;
}

// exp_transform is monotone, so the argmax is taken before it; rounding in
// exp cannot then manufacture ties the base mode does not have.
std::uint32_t ClassScorer::predict(std::span<const double> r) const {
  const auto s = raw_scores(r);
  return static_cast<std::uint32_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

std::vector<std::uint32_t> ClassScorer::predict_all(const MatrixD& reps) const {
  std::vector<std::uint32_t> out(reps.rows());
  for (std::size_t i = 0; i < reps.rows(); ++i) out[i] = predict(reps.row(i));
  return out;
}

std::uint32_t predict_class(std::span<const double> r, const ReprBundle& bundle,
                            const SemanticBases& bases, LogitsMode mode) {
  return ClassScorer(bundle, bases, mode).predict(r);
}

std::uint64_t estimate_flops(LogitsMode mode, std::uint64_t d, std::uint64_t v) {
  switch (mode) {
    case LogitsMode::SimAll:
    case LogitsMode::SimAllExp: return 6 * d * v;
    case LogitsMode::MatMul:
    case LogitsMode::MatMulExp: return 2 * d * v;
    case LogitsMode::SimGT: return 6 * d;
  }
  return 0;
}

}  // namespace vds
