#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "vds/matrix.hpp"
#include "vds/rng.hpp"

namespace vds {

/// Weights of lambda(r) = LN(MLP(r * CA(r))).
///
/// CA is a bias-free shared bottleneck d -> d/16 -> d gated by a sigmoid; with
/// a single representation both pooling branches see r itself, so the gate is
/// sigmoid(2 * Bn(r)). The MLP is d -> 2d -> d with relu; LN has a learnable
/// affine. Matrix weights total exactly 4d^2 + d^2/8.
struct ClusterModuleParams {
  std::size_t d = 0;
  MatrixD ca_w1;                // d x d/16
  MatrixD ca_w2;                // d/16 x d
  MatrixD mlp_w1;               // d x 2d
  std::vector<double> mlp_b1;   // 2d
  MatrixD mlp_w2;               // 2d x d
  std::vector<double> mlp_b2;   // d
  std::vector<double> ln_gain;  // d
  std::vector<double> ln_bias;  // d

  /// All-zero tensors of the right shapes (gradient accumulators).
  static ClusterModuleParams zeros(std::size_t d);

  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) drawn in field order;
  /// biases 0, ln_gain 1, ln_bias 0.
  static ClusterModuleParams initialize(std::size_t d, Rng& rng);

  /// Matrix weights only (biases and LN affine excluded).
  std::size_t weight_count() const;
  std::size_t parameter_count() const;

  /// Visits every parameter group in declared field order.
  template <class F>
  void for_each_group(F&& f) {
    f("ca_w1", ca_w1.values());
    f("ca_w2", ca_w2.values());
    f("mlp_w1", mlp_w1.values());
    f("mlp_b1", std::span<double>(mlp_b1));
    f("mlp_w2", mlp_w2.values());
    f("mlp_b2", std::span<double>(mlp_b2));
    f("ln_gain", std::span<double>(ln_gain));
    f("ln_bias", std::span<double>(ln_bias));
  }
  template <class F>
  void for_each_group(F&& f) const {
    f("ca_w1", ca_w1.values());
    f("ca_w2", ca_w2.values());
    f("mlp_w1", mlp_w1.values());
    f("mlp_b1", std::span<const double>(mlp_b1));
    f("mlp_w2", mlp_w2.values());
    f("mlp_b2", std::span<const double>(mlp_b2));
    f("ln_gain", std::span<const double>(ln_gain));
    f("ln_bias", std::span<const double>(ln_bias));
  }

  bool operator==(const ClusterModuleParams&) const = default;
};

inline constexpr double kLayerNormEpsilon = 1e-5;

/// Throws InvalidArgument unless d is a positive multiple of 16.
void require_module_dim(std::size_t d);

/// Intermediates of one forward pass, kept for backpropagation.
struct ForwardCache {
  std::vector<double> bottleneck;  // r . ca_w1 (pre-relu)
  std::vector<double> gate;        // sigmoid(2 * Bn(r))
  std::vector<double> gated;       // r * gate
  std::vector<double> hidden;      // gated . mlp_w1 + b1 (pre-relu)
  std::vector<double> activated;   // relu(hidden)
  std::vector<double> normalized;  // (m - mean) / sqrt(var + eps)
  double inv_std = 0.0;
  std::vector<double> output;
};

void forward(const ClusterModuleParams& params, std::span<const double> r, ForwardCache& cache);

/// Accumulates d(loss)/d(params) into grads given d(loss)/d(output).
void backward(const ClusterModuleParams& params, std::span<const double> r,
              const ForwardCache& cache, std::span<const double> d_output,
              ClusterModuleParams& grads);

std::vector<double> ca_forward(const ClusterModuleParams& params, std::span<const double> r);
std::vector<double> module_forward(const ClusterModuleParams& params, std::span<const double> r);

/// Row-wise module_forward.
MatrixD transform_all(const ClusterModuleParams& params, const MatrixD& reps);

}  // namespace vds
