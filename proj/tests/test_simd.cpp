#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "vds/error.hpp"
#include "vds/simd.hpp"

using namespace vds;
using vds::simd::Isa;

namespace {

std::vector<Isa> vector_isas() {
  std::vector<Isa> out;
  for (auto isa : {Isa::Avx2, Isa::Neon})
    if (simd::supported(isa)) out.push_back(isa);
  return out;
}

// Reassociated sums differ from the scalar order by a few ulps of the
// absolute-value sum.
void check_close(double got, double want, double magnitude) {
  CHECK(std::abs(got - want) <= 1e-14 * (magnitude + 1.0));
}

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("scalar table is always available and active is supported") {
    CHECK(simd::supported(Isa::Scalar));
    CHECK(simd::table(Isa::Scalar).isa == Isa::Scalar);
    CHECK(simd::supported(simd::active().isa));
  }

  TEST_CASE("unsupported ISA is rejected") {
    for (auto isa : {Isa::Avx2, Isa::Neon})
      if (!simd::supported(isa)) CHECK_THROWS_AS(simd::table(isa), Error);
  }

  TEST_CASE("vector kernels match the scalar reference on every length") {
    const auto& ref = simd::table(Isa::Scalar);
    Rng rng(7);
    for (auto isa : vector_isas()) {
      const auto& k = simd::table(isa);
      CAPTURE(simd::to_string(isa));
      for (std::size_t n = 0; n <= 70; ++n) {
        CAPTURE(n);
        const auto a = oracle::random_vector(rng, n);
        const auto b = oracle::random_vector(rng, n);
        double mag = 0.0;
        for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
        check_close(k.dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n), mag);
        double sq = 0.0;
        for (double x : a) sq += x * x;
        check_close(k.sum_squares(a.data(), n), ref.sum_squares(a.data(), n), sq);

        auto y1 = b, y2 = b;
        k.axpy(0.37, a.data(), y1.data(), n);
        ref.axpy(0.37, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) check_close(y1[i], y2[i], std::abs(b[i]) + std::abs(a[i]));
      }
    }
  }

  TEST_CASE("matrix kernels match the scalar reference") {
    const auto& ref = simd::table(Isa::Scalar);
    Rng rng(11);
    for (auto isa : vector_isas()) {
      const auto& k = simd::table(isa);
      for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{1, 1}, {3, 5}, {17, 33},
                                {64, 200}, {128, 64}}) {
        const auto m = oracle::random_matrix(rng, rows, cols);
        const auto x = oracle::random_vector(rng, cols);
        const auto xr = oracle::random_vector(rng, rows);
        std::vector<double> o1(rows), o2(rows), p1(cols), p2(cols);
        k.row_dots(m.data(), rows, cols, x.data(), o1.data());
        ref.row_dots(m.data(), rows, cols, x.data(), o2.data());
        for (std::size_t i = 0; i < rows; ++i) check_close(o1[i], o2[i], 10.0 * std::sqrt(cols));
        k.vec_mat(xr.data(), m.data(), rows, cols, p1.data());
        ref.vec_mat(xr.data(), m.data(), rows, cols, p2.data());
        for (std::size_t j = 0; j < cols; ++j) check_close(p1[j], p2[j], 10.0 * std::sqrt(rows));
      }
    }
  }

  TEST_CASE("row_dots and vec_mat agree with a plain matrix product") {
    Rng rng(3);
    const auto m = oracle::random_matrix(rng, 9, 14);
    MatrixD x(14, 1), xr(1, 9);
    for (double& v : x.values()) v = rng.normal();
    for (double& v : xr.values()) v = rng.normal();
    const auto mx = oracle::matmul(m, x);
    const auto xm = oracle::matmul(xr, m);
    std::vector<double> out(9), out2(14);
    simd::active().row_dots(m.data(), 9, 14, x.data(), out.data());
    simd::active().vec_mat(xr.data(), m.data(), 9, 14, out2.data());
    for (std::size_t i = 0; i < 9; ++i) CHECK(out[i] == doctest::Approx(mx(i, 0)).epsilon(1e-12));
    for (std::size_t j = 0; j < 14; ++j) CHECK(out2[j] == doctest::Approx(xm(0, j)).epsilon(1e-12));
  }
}
