#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>

namespace pmop {

/// log C for a remainder of n objects, where C = (2^n - 1) / n is the factor
/// relating the sum of mean-potentials over all non-empty subsets to the plain
/// potential sum. Written as n ln2 + log(1 - 2^-n) - ln n so large n stays finite.
inline double log_constant_c(std::size_t n) {
  if (n < 1) throw std::invalid_argument("log_constant_c: n must be >= 1");
  const double nd = static_cast<double>(n);
  return nd * std::numbers::ln2 + std::log1p(-std::exp2(-nd)) - std::log(nd);
}

}  // namespace pmop
