#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vds/matrix.hpp"
#include "vds/repr_store.hpp"
#include "vds/semantic_basis.hpp"

namespace vds {

/// Logit computation variants. SimGT scores only the ground-truth basis, so it
/// exists for the training loss and is rejected for prediction.
enum class LogitsMode { SimAll, MatMul, SimGT, SimAllExp, MatMulExp };

inline constexpr LogitsMode kAllModes[] = {LogitsMode::SimAll, LogitsMode::MatMul,
                                           LogitsMode::SimGT, LogitsMode::SimAllExp,
                                           LogitsMode::MatMulExp};
inline constexpr LogitsMode kPredictionModes[] = {LogitsMode::SimAll, LogitsMode::MatMul,
                                                  LogitsMode::SimAllExp, LogitsMode::MatMulExp};

std::string_view to_string(LogitsMode mode);
/// Accepts "sim-all", "mat-mul", "sim-gt", "sim-all-exp", "mat-mul-exp".
std::optional<LogitsMode> parse_logits_mode(std::string_view name);

bool is_similarity(LogitsMode mode);
bool is_exp(LogitsMode mode);

/// a.b / (|a||b|), clamped to [-1, 1]. Throws ZeroVector on a zero argument.
double cosine(std::span<const double> a, std::span<const double> b);

/// logits[i] = cosine(bases row i, r) over the whole vocabulary.
std::vector<double> sim_logits(std::span<const double> r, const SemanticBases& bases);

/// logits = r . W with W of shape d x v.
std::vector<double> mm_logits(std::span<const double> r, const MatrixD& w);

/// Max-shifted exponentiate-and-normalize. Preserves ordering.
std::vector<double> exp_transform(std::span<const double> logits);

struct ProbDist {
  std::vector<double> probs;
  double temperature_used = 1.0;

  std::size_t support() const { return probs.size(); }
};

/// softmax(tau * logits), max-shifted.
ProbDist to_probs(std::span<const double> logits, double tau);

/// Per-class scoring over the verbalizer's label space. Built once per
/// (bundle, bases, mode) and reused across samples.
class ClassScorer {
 public:
  ClassScorer(const ReprBundle& bundle, const SemanticBases& bases, LogitsMode mode,
              VerbalizerAggregation aggregation = VerbalizerAggregation::Mean);

  LogitsMode mode() const { return mode_; }
  std::size_t n_classes() const { return targets_.rows(); }

  /// One score per class (after exp_transform for the *Exp modes).
  std::vector<double> scores(std::span<const double> r) const;
  /// argmax of scores; ties go to the lowest class id.
  std::uint32_t predict(std::span<const double> r) const;
  std::vector<std::uint32_t> predict_all(const MatrixD& reps) const;

 private:
  std::vector<double> raw_scores(std::span<const double> r) const;

  LogitsMode mode_;
  // SimAll: unit-norm class bases. MatMul: mean LM-head column per class.
  MatrixD targets_;
};

std::uint32_t predict_class(std::span<const double> r, const ReprBundle& bundle,
                            const SemanticBases& bases, LogitsMode mode);

/// Cost of one logits computation: 6dv for similarity over all bases, 2dv for
/// matrix multiplication, 6d for the ground-truth-only similarity.
std::uint64_t estimate_flops(LogitsMode mode, std::uint64_t d, std::uint64_t v);

}  // namespace vds
