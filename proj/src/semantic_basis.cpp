#include "vds/semantic_basis.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "vds/byte_io.hpp"
#include "vds/error.hpp"

namespace vds {

namespace {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;

ConstMap as_eigen(const MatrixD& m) {
  return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

double max_abs(const EigenRowMajor& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

MatrixD pseudoinverse(const MatrixD& w, double rcond) {
  if (w.empty()) throw Error(ErrorCode::InvalidArgument, "pseudoinverse of an empty matrix");
  for (double x : w.values())
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "pseudoinverse input is not finite");

  const auto a = as_eigen(w);
  Eigen::BDCSVD<EigenRowMajor> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success)
    throw Error(ErrorCode::SvdNonConvergence, "SVD did not converge");

  const auto& sigma = svd.singularValues();
  const double cutoff = rcond * (sigma.size() > 0 ? sigma(0) : 0.0);
  Eigen::VectorXd inv(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    inv(i) = (sigma(i) > cutoff && sigma(i) > 0.0) ? 1.0 / sigma(i) : 0.0;

  const EigenRowMajor result = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  MatrixD out(w.cols(), w.rows());
  std::copy(result.data(), result.data() + result.size(), out.data());
  return out;
}

double PenroseReport::worst() const { return *std::max_element(residuals.begin(), residuals.end()); }

PenroseReport check_penrose(const MatrixD& w, const MatrixD& wp, double tol) {
  if (wp.rows() != w.cols() || wp.cols() != w.rows())
    throw Error(ErrorCode::ShapeMismatch, "pseudoinverse must be the transpose shape of W");
  const auto a = as_eigen(w);
  const auto ap = as_eigen(wp);
  const EigenRowMajor a_ap = a * ap;
  const EigenRowMajor ap_a = ap * a;

  PenroseReport report;
  report.tol = tol;
  report.residuals[0] = max_abs(a_ap * a - a);
  report.residuals[1] = max_abs(ap_a * ap - ap);
  report.residuals[2] = max_abs(a_ap.transpose() - a_ap);
  report.residuals[3] = max_abs(ap_a.transpose() - ap_a);
  report.passed = report.worst() < tol;
  return report;
}

std::string_view to_string(BasisSource source) {
  return source == BasisSource::HeadPseudoinverse ? "head-pseudoinverse" : "embedding-rows";
}

SemanticBases head_bases(const ReprBundle& bundle, double rcond) {
  return {pseudoinverse(matrix_cast<double>(bundle.lm_head), rcond),
          BasisSource::HeadPseudoinverse, rcond};
}

SemanticBases embedding_bases(const MatrixD& embedding) {
  return {embedding, BasisSource::EmbeddingRows, 0.0};
}

std::vector<double> class_basis(const SemanticBases& bases, const Verbalizer& verbalizer,
                                std::size_t class_id, VerbalizerAggregation aggregation) {
  if (class_id >= verbalizer.size() || verbalizer[class_id].empty())
    throw Error(ErrorCode::UnknownClass, "class " + std::to_string(class_id) + " has no tokens");
  const auto& tokens = verbalizer[class_id];
  for (auto t : tokens)
    if (t >= bases.vocab())
      throw Error(ErrorCode::InvalidArgument, "token " + std::to_string(t) + " out of range");

  if (aggregation == VerbalizerAggregation::FirstToken) {
    auto row = bases.row(tokens.front());
    return {row.begin(), row.end()};
  }
  std::vector<double> mean(bases.dim(), 0.0);
  for (auto t : tokens) {
    auto row = bases.row(t);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += row[j];
  }
  const double scale = 1.0 / static_cast<double>(tokens.size());
  for (double& x : mean) x *= scale;
  return mean;
}

void write_bases(const SemanticBases& bases, const std::filesystem::path& path) {
  std::string payload;
  payload.reserve(bases.bases.size() * 4);
  for (double x : bases.bases.values()) byte_io::put_f32(payload, static_cast<float>(x));
  byte_io::write_file(path, payload);

  const nlohmann::json sidecar = {{"v", bases.vocab()},
                                  {"d", bases.dim()},
                                  {"source", std::string(to_string(bases.source))},
                                  {"rcond", bases.rcond}};
  byte_io::write_file(path.string() + ".json", sidecar.dump() + "\n");
}

SemanticBases read_bases(const std::filesystem::path& path) {
  SemanticBases out;
  std::size_t v = 0, d = 0;
  try {
    const auto sidecar = nlohmann::json::parse(byte_io::read_file(path.string() + ".json"));
    v = sidecar.at("v").get<std::size_t>();
    d = sidecar.at("d").get<std::size_t>();
    out.rcond = sidecar.at("rcond").get<double>();
    out.source = sidecar.at("source").get<std::string>() == "embedding-rows"
                     ? BasisSource::EmbeddingRows
                     : BasisSource::HeadPseudoinverse;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::BadHeader, e.what());
  }
  const std::string bytes = byte_io::read_file(path);
  if (bytes.size() != v * d * 4)
    throw Error(bytes.size() < v * d * 4 ? ErrorCode::Truncated : ErrorCode::ShapeMismatch,
                "bases payload does not match sidecar shape");
  byte_io::Reader in(bytes);
  out.bases = MatrixD(v, d);
  for (double& x : out.bases.values()) x = in.f32("bases");
  return out;
}

}  // namespace vds
