#pragma once

#include <cstdint>
#include <span>

namespace vds {

using Labels = std::span<const std::uint32_t>;

/// Fraction of positions where pred == truth.
double accuracy(Labels pred, Labels truth);

/// Unweighted mean of per-class F1 over classes 0..n_classes-1. A class with
/// no predicted and no actual members scores 0 and still counts.
double macro_f1(Labels pred, Labels truth, std::size_t n_classes);

/// Adjusted Rand Index from the contingency table. With a zero denominator it
/// returns 1 when both partitions agree on every pair and 0 otherwise.
double ari(Labels a, Labels b);

}  // namespace vds
