#include "vds/simd.hpp"

namespace vds::simd {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_squares(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void row_dots(const double* m, std::size_t rows, std::size_t cols, const double* x, double* out) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = dot(m + r * cols, x, cols);
}

void vec_mat(const double* x, const double* m, std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) axpy(x[r], m + r * cols, out, cols);
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{Isa::Scalar, dot, sum_squares, axpy, row_dots, vec_mat};
}

}  // namespace vds::simd
