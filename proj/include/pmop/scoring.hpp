#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "core.hpp"

namespace pmop {

inline double score(std::span<const double> x, std::span<const double> w) {
  require_same_size(x.size(), w.size(), "score");
  return std::inner_product(x.begin(), x.end(), w.begin(), 0.0);
}

// The potential is exp{score}; everything downstream stays in the log domain,
// so this is the score itself. Exponentiate only after subtracting a shift.
inline double log_potential(std::span<const double> x, std::span<const double> w) { return score(x, w); }

/// Scores of every document in a query plus the max score used as the
/// exponentiation shift.
struct ScoreCache {
  std::vector<double> scores;
  double shift = 0.0;

  ScoreCache() = default;
  ScoreCache(const QueryGroup& group, std::span<const double> w) {
    scores.reserve(group.size());
    for (const auto& x : group.docs) scores.push_back(score(x, w));
    shift = scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
  }

  /// exp(f_i - shift), in (0, 1].
  double shifted_potential(std::size_t i) const { return std::exp(scores[i] - shift); }
};

inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  const double m = *std::max_element(values.begin(), values.end());
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

// log(exp(a) + exp(b)), tolerating -inf on either side.
inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// log(1 + exp(x)).
inline double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline std::vector<double> softmax(std::span<const double> values) {
  const double lse = log_sum_exp(values);
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(), [lse](double v) { return std::exp(v - lse); });
  return out;
}

/// Log-sum-exp of `scores` restricted to `indices`.
inline double log_sum_exp(std::span<const double> scores, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("log_sum_exp: empty index set");
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i : indices) m = std::max(m, scores[i]);
  double s = 0.0;
  for (std::size_t i : indices) s += std::exp(scores[i] - m);
  return m + std::log(s);
}

/// out += scale * x
inline void axpy(double scale, std::span<const double> x, std::span<double> out) {
  for (std::size_t f = 0; f < out.size(); ++f) out[f] += scale * x[f];
}

}  // namespace pmop
