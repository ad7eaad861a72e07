#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "vds/matrix.hpp"
#include "vds/repr_store.hpp"

namespace vds {

inline constexpr double kDefaultRcond = 1e-10;

/// Moore-Penrose pseudoinverse of a d x v matrix via SVD, in 64-bit.
/// Singular values <= rcond * sigma_max are treated as zero.
MatrixD pseudoinverse(const MatrixD& w, double rcond = kDefaultRcond);

struct PenroseReport {
  // max-abs residuals of: W Wp W = W, Wp W Wp = Wp, (W Wp)^T = W Wp, (Wp W)^T = Wp W
  std::array<double, 4> residuals{};
  double tol = 0.0;
  bool passed = false;

  double worst() const;
};

PenroseReport check_penrose(const MatrixD& w, const MatrixD& wp, double tol);

enum class BasisSource { HeadPseudoinverse, EmbeddingRows };

std::string_view to_string(BasisSource source);

/// One latent-space vector per vocabulary token (v x d). Row i maps through
/// the LM head to the least-squares fit of token i's onehot logits.
struct SemanticBases {
  MatrixD bases;
  BasisSource source = BasisSource::HeadPseudoinverse;
  double rcond = kDefaultRcond;

  std::size_t vocab() const { return bases.rows(); }
  std::size_t dim() const { return bases.cols(); }
  std::span<const double> row(std::size_t token) const { return bases.row(token); }
};

SemanticBases head_bases(const ReprBundle& bundle, double rcond = kDefaultRcond);

/// Input-side bases: row i of the embedding matrix, copied verbatim.
SemanticBases embedding_bases(const MatrixD& embedding);

/// How a multi-token label collapses to a single class basis.
enum class VerbalizerAggregation { Mean, FirstToken };

std::vector<double> class_basis(const SemanticBases& bases, const Verbalizer& verbalizer,
                                std::size_t class_id,
                                VerbalizerAggregation aggregation = VerbalizerAggregation::Mean);

/// Raw little-endian f32 matrix plus a one-line JSON sidecar at path + ".json".
void write_bases(const SemanticBases& bases, const std::filesystem::path& path);
SemanticBases read_bases(const std::filesystem::path& path);

}  // namespace vds
