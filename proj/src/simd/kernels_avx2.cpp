#include "vds/simd.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define VDS_HAVE_AVX2 1
#else
#define VDS_HAVE_AVX2 0
#endif

namespace vds::simd {

#if VDS_HAVE_AVX2
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd(), acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_squares(const double* a, std::size_t n) { return dot(a, a, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
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
const KernelTable kAvx2Table{Isa::Avx2, dot, sum_squares, axpy, row_dots, vec_mat};
bool avx2_compiled() { return true; }
}  // namespace detail

#else

namespace detail {
const KernelTable kAvx2Table = kScalarTable;
bool avx2_compiled() { return false; }
}  // namespace detail

#endif

}  // namespace vds::simd
