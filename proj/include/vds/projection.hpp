#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vds/matrix.hpp"

namespace vds {

struct Projection2D {
  MatrixD points;                          // n x 2
  std::vector<std::vector<double>> axes;   // two unit principal directions
};

/// Projects centered rows onto their top-2 principal components, found by
/// power iteration (fixed iteration count, seeded start) with deflation.
Projection2D pca_2d(const MatrixD& reps, std::uint64_t seed, std::size_t iterations = 100);

struct ScatterPanel {
  std::string title;
  const Projection2D* projection;
  std::span<const std::uint32_t> labels;
};

/// Self-contained SVG, panels side by side, one circle per sample filled by class.
std::string scatter_svg(std::span<const ScatterPanel> panels);

}  // namespace vds
