#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <string_view>

namespace vds::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);

/// Inner-loop primitives shared by every numeric module. Each ISA provides the
/// full table; the scalar one is the reference the others are tested against.
struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i a[i]^2
  double (*sum_squares)(const double* a, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[r] = m[r, :] . x   (m row-major, rows x cols)
  void (*row_dots)(const double* m, std::size_t rows, std::size_t cols, const double* x,
                   double* out);
  // out[c] = sum_r x[r] * m[r, c]   (overwrites out)
  void (*vec_mat)(const double* x, const double* m, std::size_t rows, std::size_t cols,
                  double* out);
};

bool supported(Isa isa);

/// Table for a specific ISA; throws vds::Error(InvalidArgument) when the CPU
/// or build lacks it.
const KernelTable& table(Isa isa);

/// Best supported table, chosen once per process. Setting VDS_ISA=scalar in
/// the environment pins the reference kernels.
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

inline double sum_squares(std::span<const double> a) {
  return active().sum_squares(a.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

namespace detail {
extern const KernelTable kScalarTable;
extern const KernelTable kAvx2Table;
extern const KernelTable kNeonTable;
bool avx2_compiled();
bool neon_compiled();
}  // namespace detail

}  // namespace vds::simd
