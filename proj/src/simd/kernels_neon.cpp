#include "vds/simd.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)
#include <arm_neon.h>
#define VDS_HAVE_NEON 1
#else
#define VDS_HAVE_NEON 0
#endif

namespace vds::simd {

#if VDS_HAVE_NEON
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = vdupq_n_f64(0.0);
  float64x2_t acc2 = vdupq_n_f64(0.0), acc3 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    acc2 = vfmaq_f64(acc2, vld1q_f64(a + i + 4), vld1q_f64(b + i + 4));
    acc3 = vfmaq_f64(acc3, vld1q_f64(a + i + 6), vld1q_f64(b + i + 6));
  }
  for (; i + 2 <= n; i += 2) acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
  double s = vaddvq_f64(vaddq_f64(vaddq_f64(acc0, acc1), vaddq_f64(acc2, acc3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_squares(const double* a, std::size_t n) { return dot(a, a, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    vst1q_f64(y + i + 2, vfmaq_f64(vld1q_f64(y + i + 2), va, vld1q_f64(x + i + 2)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
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
const KernelTable kNeonTable{Isa::Neon, dot, sum_squares, axpy, row_dots, vec_mat};
bool neon_compiled() { return true; }
}  // namespace detail

#else

namespace detail {
const KernelTable kNeonTable = kScalarTable;
bool neon_compiled() { return false; }
}  // namespace detail

#endif

}  // namespace vds::simd
