#include "vds/objective.hpp"

#include <algorithm>
#include <cmath>

#include "vds/error.hpp"
#include "vds/simd.hpp"

namespace vds {

std::string_view to_string(LossSupport support) {
  return support == LossSupport::FullVocabulary ? "full-vocabulary" : "label-tokens";
}

std::optional<LossSupport> parse_loss_support(std::string_view name) {
  if (name == "full-vocabulary") return LossSupport::FullVocabulary;
  if (name == "label-tokens") return LossSupport::LabelTokensOnly;
  return std::nullopt;
}

namespace {

void normalize_rows(MatrixD& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    const double n2 = simd::sum_squares(row);
    if (n2 == 0.0) throw Error(ErrorCode::ZeroVector, "zero basis row " + std::to_string(i));
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : row) x *= inv;
  }
}

}  // namespace

ClusteringObjective::ClusteringObjective(const ReprBundle& bundle, const SemanticBases& bases,
                                         LogitsMode mode, double tau, LossSupport support,
                                         VerbalizerAggregation aggregation)
    : mode_(mode), tau_(tau), support_(support), d_(bundle.d) {
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
  if (bases.dim() != bundle.d || bases.vocab() != bundle.v)
    throw Error(ErrorCode::ShapeMismatch, "semantic bases do not match the bundle");

  const std::size_t n_classes = bundle.n_classes;
  unit_class_ = MatrixD(n_classes, d_);
  class_head_ = MatrixD(n_classes, d_);
  for (std::size_t c = 0; c < n_classes; ++c) {
    const auto basis = class_basis(bases, bundle.verbalizer, c, aggregation);
    std::copy(basis.begin(), basis.end(), unit_class_.row(c).begin());
    const auto& tokens = bundle.verbalizer[c];
    const double scale = 1.0 / static_cast<double>(tokens.size());
    for (auto t : tokens)
      for (std::size_t j = 0; j < d_; ++j)
        class_head_(c, j) += scale * static_cast<double>(bundle.lm_head(j, t));
    first_token_.push_back(tokens.front());
  }
  normalize_rows(unit_class_);

  if (support == LossSupport::FullVocabulary) {
    if (mode == LogitsMode::SimAll || mode == LogitsMode::SimAllExp) {
      unit_bases_ = bases.bases;
      normalize_rows(unit_bases_);
    } else if (mode == LogitsMode::MatMul || mode == LogitsMode::MatMulExp) {
      head_ = matrix_cast<double>(bundle.lm_head);
    }
  }
}

double ClusteringObjective::cross_entropy(std::span<const double> logits, std::size_t target,
                                          std::span<double> d_logits) const {
  // Optional exp transform, then softmax(tau * z) against the target index.
  std::vector<double> z(logits.begin(), logits.end());
  if (is_exp(mode_)) z = exp_transform(logits);
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> probs(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    probs[i] = std::exp(tau_ * (z[i] - top));
    total += probs[i];
  }
  const double loss = std::log(total) - tau_ * (z[target] - top);
  if (d_logits.empty()) return loss;

  std::vector<double> d_z(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) d_z[i] = tau_ * (probs[i] / total);
  d_z[target] -= tau_;
  if (is_exp(mode_)) {
    // softmax Jacobian: dl = e * (dz - <dz, e>)
    double inner = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) inner += d_z[i] * z[i];
    for (std::size_t i = 0; i < z.size(); ++i) d_logits[i] = z[i] * (d_z[i] - inner);
  } else {
    std::copy(d_z.begin(), d_z.end(), d_logits.begin());
  }
  return loss;
}

double ClusteringObjective::output_loss(std::span<const double> o, std::uint32_t label,
                                        std::span<double> d_o) const {
  const auto& k = simd::active();
  const bool want_grad = !d_o.empty();

  if (mode_ == LogitsMode::SimGT || is_similarity(mode_)) {
    const double n2 = simd::sum_squares(o);
    if (n2 == 0.0) throw Error(ErrorCode::ZeroVector, "module output is the zero vector");
    const double norm = std::sqrt(n2);

    if (mode_ == LogitsMode::SimGT) {
      const auto target = unit_class_.row(label);
      const double cos = simd::dot(o, target) / norm;
      if (want_grad)
        for (std::size_t j = 0; j < d_; ++j) d_o[j] = -(target[j] - cos * o[j] / norm) / norm;
      return 1.0 - cos;
    }

    const MatrixD& unit = support_ == LossSupport::FullVocabulary ? unit_bases_ : unit_class_;
    const std::size_t target =
        support_ == LossSupport::FullVocabulary ? first_token_[label] : label;
    std::vector<double> logits(unit.rows());
    k.row_dots(unit.data(), unit.rows(), d_, o.data(), logits.data());
    for (double& x : logits) x /= norm;
    std::vector<double> d_logits(want_grad ? logits.size() : 0);
    const double loss = cross_entropy(logits, target, d_logits);
    if (want_grad) {
      // d cos_i / d o = (u_i - cos_i * o / |o|) / |o|
      k.vec_mat(d_logits.data(), unit.data(), unit.rows(), d_, d_o.data());
      const double radial = simd::dot(d_logits, logits);
      for (std::size_t j = 0; j < d_; ++j) d_o[j] = (d_o[j] - radial * o[j] / norm) / norm;
    }
    return loss;
  }

  // Matrix-multiplication logits.
  std::vector<double> logits;
  std::size_t target;
  if (support_ == LossSupport::FullVocabulary) {
    logits.resize(head_.cols());
    k.vec_mat(o.data(), head_.data(), d_, head_.cols(), logits.data());
    target = first_token_[label];
  } else {
    logits.resize(class_head_.rows());
    k.row_dots(class_head_.data(), class_head_.rows(), d_, o.data(), logits.data());
    target = label;
  }
  std::vector<double> d_logits(want_grad ? logits.size() : 0);
  const double loss = cross_entropy(logits, target, d_logits);
  if (want_grad) {
    if (support_ == LossSupport::FullVocabulary)
      k.row_dots(head_.data(), d_, head_.cols(), d_logits.data(), d_o.data());
    else
      k.vec_mat(d_logits.data(), class_head_.data(), class_head_.rows(), d_, d_o.data());
  }
  return loss;
}

double ClusteringObjective::loss(const ClusterModuleParams& params, const Batch& batch) const {
  if (batch.labels.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  ForwardCache cache;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.labels.size(); ++i) {
    forward(params, batch.reps.row(i), cache);
    total += output_loss(cache.output, batch.labels[i], {});
  }
  return total / static_cast<double>(batch.labels.size());
}

double ClusteringObjective::loss_and_grad(const ClusterModuleParams& params, const Batch& batch,
                                          ClusterModuleParams& grads,
                                          std::vector<double>* per_sample) const {
  if (batch.labels.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  grads = ClusterModuleParams::zeros(params.d);
  if (per_sample) per_sample->assign(batch.labels.size(), 0.0);

  const double scale = 1.0 / static_cast<double>(batch.labels.size());
  ForwardCache cache;
  std::vector<double> d_out(d_);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.labels.size(); ++i) {
    const auto r = batch.reps.row(i);
    forward(params, r, cache);
    const double l = output_loss(cache.output, batch.labels[i], d_out);
    if (per_sample) (*per_sample)[i] = l;
    total += l;
    for (double& x : d_out) x *= scale;
    backward(params, r, cache, d_out, grads);
  }
  return total * scale;
}

double loss(const ClusterModuleParams& params, const Batch& batch, const SemanticBases& bases,
            const ReprBundle& bundle, LogitsMode mode, double tau, LossSupport support) {
  return ClusteringObjective(bundle, bases, mode, tau, support).loss(params, batch);
}

ClusterModuleParams grad(const ClusterModuleParams& params, const Batch& batch,
                         const SemanticBases& bases, const ReprBundle& bundle, LogitsMode mode,
                         double tau, LossSupport support) {
  ClusterModuleParams grads;
  ClusteringObjective(bundle, bases, mode, tau, support).loss_and_grad(params, batch, grads);
  return grads;
}

}  // namespace vds
