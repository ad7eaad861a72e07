#include "vds/neural_cluster.hpp"

#include <algorithm>
#include <cmath>

#include "vds/error.hpp"
#include "vds/simd.hpp"

namespace vds {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void fill_uniform(MatrixD& m, Rng& rng, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : m.values()) x = rng.uniform(-bound, bound);
}

// out[i] += a[i] * b  for every row: grads += a (outer) b
void add_outer(MatrixD& grads, std::span<const double> a, std::span<const double> b) {
  const auto& k = simd::active();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != 0.0) k.axpy(a[i], b.data(), grads.row(i).data(), b.size());
}

}  // namespace

void require_module_dim(std::size_t d) {
  if (d == 0 || d % 16 != 0)
    throw Error(ErrorCode::InvalidArgument,
                "clustering module needs d divisible by 16, got " + std::to_string(d));
}

ClusterModuleParams ClusterModuleParams::zeros(std::size_t d) {
  require_module_dim(d);
  ClusterModuleParams p;
  p.d = d;
  p.ca_w1 = MatrixD(d, d / 16);
  p.ca_w2 = MatrixD(d / 16, d);
  p.mlp_w1 = MatrixD(d, 2 * d);
  p.mlp_b1.assign(2 * d, 0.0);
  p.mlp_w2 = MatrixD(2 * d, d);
  p.mlp_b2.assign(d, 0.0);
  p.ln_gain.assign(d, 0.0);
  p.ln_bias.assign(d, 0.0);
  return p;
}

ClusterModuleParams ClusterModuleParams::initialize(std::size_t d, Rng& rng) {
  ClusterModuleParams p = zeros(d);
  fill_uniform(p.ca_w1, rng, d);
  fill_uniform(p.ca_w2, rng, d / 16);
  fill_uniform(p.mlp_w1, rng, d);
  fill_uniform(p.mlp_w2, rng, 2 * d);
  p.ln_gain.assign(d, 1.0);
  return p;
}

std::size_t ClusterModuleParams::weight_count() const {
  return ca_w1.size() + ca_w2.size() + mlp_w1.size() + mlp_w2.size();
}

std::size_t ClusterModuleParams::parameter_count() const {
  std::size_t n = 0;
  for_each_group([&](std::string_view, auto values) { n += values.size(); });
  return n;
}

void forward(const ClusterModuleParams& p, std::span<const double> r, ForwardCache& c) {
  const std::size_t d = p.d;
  const std::size_t b = d / 16;
  if (r.size() != d) throw Error(ErrorCode::ShapeMismatch, "representation size != module d");
  const auto& k = simd::active();

  c.bottleneck.resize(b);
  k.vec_mat(r.data(), p.ca_w1.data(), d, b, c.bottleneck.data());
  std::vector<double> squeezed(b);
  for (std::size_t i = 0; i < b; ++i) squeezed[i] = std::max(c.bottleneck[i], 0.0);

  // Both pooling branches reduce to r, so the two bottleneck outputs are equal.
  c.gate.resize(d);
  k.vec_mat(squeezed.data(), p.ca_w2.data(), b, d, c.gate.data());
  c.gated.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    c.gate[j] = sigmoid(2.0 * c.gate[j]);
    c.gated[j] = r[j] * c.gate[j];
  }

  c.hidden.resize(2 * d);
  k.vec_mat(c.gated.data(), p.mlp_w1.data(), d, 2 * d, c.hidden.data());
  c.activated.resize(2 * d);
  for (std::size_t j = 0; j < 2 * d; ++j) {
    c.hidden[j] += p.mlp_b1[j];
    c.activated[j] = std::max(c.hidden[j], 0.0);
  }

  std::vector<double> m(d);
  k.vec_mat(c.activated.data(), p.mlp_w2.data(), 2 * d, d, m.data());
  double mean = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    m[j] += p.mlp_b2[j];
    mean += m[j];
  }
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (std::size_t j = 0; j < d; ++j) var += (m[j] - mean) * (m[j] - mean);
  var /= static_cast<double>(d);
  c.inv_std = 1.0 / std::sqrt(var + kLayerNormEpsilon);

  c.normalized.resize(d);
  c.output.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    c.normalized[j] = (m[j] - mean) * c.inv_std;
    c.output[j] = p.ln_gain[j] * c.normalized[j] + p.ln_bias[j];
    if (!std::isfinite(c.output[j]))
      throw Error(ErrorCode::NonFiniteIntermediate, "module output is not finite");
  }
}

void backward(const ClusterModuleParams& p, std::span<const double> r, const ForwardCache& c,
              std::span<const double> d_out, ClusterModuleParams& g) {
  const std::size_t d = p.d;
  const std::size_t b = d / 16;
  const auto& k = simd::active();

  // Layer norm.
  std::vector<double> d_norm(d);
  double mean_dn = 0.0, mean_dn_n = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    g.ln_gain[j] += d_out[j] * c.normalized[j];
    g.ln_bias[j] += d_out[j];
    d_norm[j] = d_out[j] * p.ln_gain[j];
    mean_dn += d_norm[j];
    mean_dn_n += d_norm[j] * c.normalized[j];
  }
  mean_dn /= static_cast<double>(d);
  mean_dn_n /= static_cast<double>(d);
  std::vector<double> d_m(d);
  for (std::size_t j = 0; j < d; ++j)
    d_m[j] = c.inv_std * (d_norm[j] - mean_dn - c.normalized[j] * mean_dn_n);

  // Second MLP layer.
  for (std::size_t j = 0; j < d; ++j) g.mlp_b2[j] += d_m[j];
  add_outer(g.mlp_w2, c.activated, d_m);
  std::vector<double> d_hidden(2 * d);
  k.row_dots(p.mlp_w2.data(), 2 * d, d, d_m.data(), d_hidden.data());
  for (std::size_t j = 0; j < 2 * d; ++j) {
    if (c.hidden[j] <= 0.0) d_hidden[j] = 0.0;
    g.mlp_b1[j] += d_hidden[j];
  }

  // First MLP layer.
  add_outer(g.mlp_w1, c.gated, d_hidden);
  std::vector<double> d_gated(d);
  k.row_dots(p.mlp_w1.data(), d, 2 * d, d_hidden.data(), d_gated.data());

  // Gate: gated = r * sigmoid(2 z); only the gate path carries parameters.
  std::vector<double> d_z(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double s = c.gate[j];
    d_z[j] = d_gated[j] * r[j] * 2.0 * s * (1.0 - s);
  }
  std::vector<double> squeezed(b);
  for (std::size_t i = 0; i < b; ++i) squeezed[i] = std::max(c.bottleneck[i], 0.0);
  add_outer(g.ca_w2, squeezed, d_z);
  std::vector<double> d_bottleneck(b);
  k.row_dots(p.ca_w2.data(), b, d, d_z.data(), d_bottleneck.data());
  for (std::size_t i = 0; i < b; ++i)
    if (c.bottleneck[i] <= 0.0) d_bottleneck[i] = 0.0;
  add_outer(g.ca_w1, r, d_bottleneck);
}

std::vector<double> ca_forward(const ClusterModuleParams& params, std::span<const double> r) {
  ForwardCache cache;
  forward(params, r, cache);
  return cache.gate;
}

std::vector<double> module_forward(const ClusterModuleParams& params, std::span<const double> r) {
  ForwardCache cache;
  forward(params, r, cache);
  return cache.output;
}

MatrixD transform_all(const ClusterModuleParams& params, const MatrixD& reps) {
  MatrixD out(reps.rows(), reps.cols());
  ForwardCache cache;
  for (std::size_t i = 0; i < reps.rows(); ++i) {
    forward(params, reps.row(i), cache);
    std::copy(cache.output.begin(), cache.output.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace vds
