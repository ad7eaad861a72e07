#include "vds/projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vds/error.hpp"
#include "vds/rng.hpp"
#include "vds/simd.hpp"

namespace vds {

namespace {

std::vector<double> power_iteration(const MatrixD& cov, Rng& rng, std::size_t iterations) {
  const std::size_t d = cov.rows();
  std::vector<double> v(d), next(d);
  for (double& x : v) x = rng.normal();
  for (std::size_t it = 0; it < iterations; ++it) {
    simd::active().row_dots(cov.data(), d, d, v.data(), next.data());
    const double n2 = simd::sum_squares(next);
    if (n2 == 0.0) break;  // remaining variance is zero; keep the current direction
    const double inv = 1.0 / std::sqrt(n2);
    for (std::size_t j = 0; j < d; ++j) v[j] = next[j] * inv;
  }
  const double n2 = simd::sum_squares(v);
  for (double& x : v) x /= std::sqrt(n2);
  // Fix the sign so the largest-magnitude entry is positive.
  const auto top = std::max_element(v.begin(), v.end(),
                                    [](double a, double b) { return std::abs(a) < std::abs(b); });
  if (*top < 0.0)
    for (double& x : v) x = -x;
  return v;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

Projection2D pca_2d(const MatrixD& reps, std::uint64_t seed, std::size_t iterations) {
  const std::size_t n = reps.rows(), d = reps.cols();
  if (n == 0 || d < 2) throw Error(ErrorCode::InvalidArgument, "PCA needs rows and d >= 2");

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) simd::axpy(1.0, reps.row(i), mean);
  for (double& x : mean) x /= static_cast<double>(n);
  MatrixD centered(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = reps(i, j) - mean[j];

  MatrixD cov(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = centered.row(i);
    for (std::size_t j = 0; j < d; ++j) simd::axpy(row[j] / static_cast<double>(n), row, cov.row(j));
  }

  Rng rng(seed);
  Projection2D out;
  for (int component = 0; component < 2; ++component) {
    auto axis = power_iteration(cov, rng, iterations);
    std::vector<double> cv(d);
    simd::active().row_dots(cov.data(), d, d, axis.data(), cv.data());
    const double lambda = simd::dot(axis, cv);
    for (std::size_t j = 0; j < d; ++j) simd::axpy(-lambda * axis[j], axis, cov.row(j));
    out.axes.push_back(std::move(axis));
  }

  out.points = MatrixD(n, 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 2; ++c) out.points(i, c) = simd::dot(centered.row(i), out.axes[c]);
  return out;
}

std::string scatter_svg(std::span<const ScatterPanel> panels) {
  constexpr double kPanel = 420.0, kMargin = 30.0;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    fmt(kPanel * static_cast<double>(panels.size())) + "\" height=\"" +
                    fmt(kPanel + 20.0) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& panel = panels[p];
    const MatrixD& pts = panel.projection->points;
    double lo[2] = {INFINITY, INFINITY}, hi[2] = {-INFINITY, -INFINITY};
    for (std::size_t i = 0; i < pts.rows(); ++i)
      for (int c = 0; c < 2; ++c) {
        lo[c] = std::min(lo[c], pts(i, c));
        hi[c] = std::max(hi[c], pts(i, c));
      }
    const double x0 = kPanel * static_cast<double>(p);
    const double inner = kPanel - 2.0 * kMargin;
    svg += "<g>\n<text x=\"" + fmt(x0 + kMargin) + "\" y=\"20\" font-family=\"sans-serif\" "
           "font-size=\"14\">" + panel.title + "</text>\n";
    svg += "<rect x=\"" + fmt(x0 + kMargin) + "\" y=\"" + fmt(kMargin) + "\" width=\"" +
           fmt(inner) + "\" height=\"" + fmt(inner) + "\" fill=\"none\" stroke=\"#999\"/>\n";
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      const double sx = hi[0] > lo[0] ? (pts(i, 0) - lo[0]) / (hi[0] - lo[0]) : 0.5;
      const double sy = hi[1] > lo[1] ? (pts(i, 1) - lo[1]) / (hi[1] - lo[1]) : 0.5;
      svg += "<circle cx=\"" + fmt(x0 + kMargin + sx * inner) + "\" cy=\"" +
             fmt(kMargin + (1.0 - sy) * inner) + "\" r=\"2.5\" fill=\"" +
             kPalette[panel.labels[i] % std::size(kPalette)] + "\" fill-opacity=\"0.7\"/>\n";
    }
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace vds
