#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vds/neural_cluster.hpp"
#include "vds/repr_store.hpp"
#include "vds/semantic_basis.hpp"
#include "vds/semantic_logits.hpp"

namespace vds {

/// Which logits the cross-entropy runs over: the whole vocabulary (target is
/// the class's first verbalizer token) or one aggregated logit per class.
enum class LossSupport { FullVocabulary, LabelTokensOnly };

std::string_view to_string(LossSupport support);
/// Accepts "full-vocabulary" and "label-tokens".
std::optional<LossSupport> parse_loss_support(std::string_view name);

struct Batch {
  MatrixD reps;
  std::vector<std::uint32_t> labels;
};

/// Clustering loss that pulls lambda(r) toward the semantic basis of r's label.
/// Targets (unit bases, LM head, class aggregates) are precomputed once.
class ClusteringObjective {
 public:
  ClusteringObjective(const ReprBundle& bundle, const SemanticBases& bases, LogitsMode mode,
                      double tau, LossSupport support,
                      VerbalizerAggregation aggregation = VerbalizerAggregation::Mean);

  LogitsMode mode() const { return mode_; }

  /// Mean loss over the batch.
  double loss(const ClusterModuleParams& params, const Batch& batch) const;

  /// Mean loss; grads is overwritten with its gradient. When per_sample is
  /// given it receives each row's (unaveraged) loss.
  double loss_and_grad(const ClusterModuleParams& params, const Batch& batch,
                       ClusterModuleParams& grads,
                       std::vector<double>* per_sample = nullptr) const;

  /// Loss of one module output; writes d(loss)/d(output) when d_output is non-empty.
  double output_loss(std::span<const double> output, std::uint32_t label,
                     std::span<double> d_output) const;

 private:
  double cross_entropy(std::span<const double> logits, std::size_t target,
                       std::span<double> d_logits) const;

  LogitsMode mode_;
  double tau_;
  LossSupport support_;
  std::size_t d_;
  MatrixD unit_bases_;   // v x d, FullVocabulary similarity
  MatrixD head_;         // d x v, FullVocabulary matmul
  MatrixD unit_class_;   // C x d, unit class bases (label-token similarity, SimGT)
  MatrixD class_head_;   // C x d, mean LM-head column per class
  std::vector<std::uint32_t> first_token_;
};

double loss(const ClusterModuleParams& params, const Batch& batch, const SemanticBases& bases,
            const ReprBundle& bundle, LogitsMode mode, double tau, LossSupport support);

ClusterModuleParams grad(const ClusterModuleParams& params, const Batch& batch,
                         const SemanticBases& bases, const ReprBundle& bundle, LogitsMode mode,
                         double tau, LossSupport support);

}  // namespace vds
