#pragma once

#include <cstddef>
#include <span>

namespace shiftnet {

// Fixed-order pairwise summation: run-to-run deterministic, O(log n) error growth.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

}  // namespace shiftnet
