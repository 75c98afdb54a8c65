#pragma once

// Full-decomposition model: a block's potential is the mean of its members'
// potentials exp{f(x,w)}, so each stage normaliser collapses to C(N_k) times
// the plain potential sum over the remainder. Likelihood and gradient then
// need a single backward pass over the blocks.

#include <cmath>
#include <span>
#include <vector>

#include "constant.hpp"
#include "core.hpp"
#include "scoring.hpp"

namespace pmop {

/// Per-stage remainder statistics built backward over the blocks.
///
/// `log_a[k]` is log of the potential sum over the remainder R_k.
/// `centre` row k is the softmax-weighted feature mean over R_k, i.e. the raw
/// sum of potential gradients divided by a_k. Storing the normalised form keeps
/// every weight in [0, 1].
struct StageAccumulators {
  std::vector<double> log_a;
  std::vector<double> log_block;  // log potential sum over X_k
  std::vector<double> centre;     // K x F, row-major
  std::size_t feature_count = 0;

  std::span<const double> centre_row(std::size_t k) const {
    return {centre.data() + k * feature_count, feature_count};
  }
};

namespace detail {

inline void check_inputs(const QueryGroup& group, const OrderedPartition& part, std::span<const double> w) {
  if (part.object_count() != group.size()) {
    throw DimensionError("ordered partition does not match query size");
  }
  for (const auto& x : group.docs) require_same_size(x.size(), w.size(), "weights");
}

// Softmax-weighted mean of the docs in `block`, written into `out`.
inline void block_centre(const QueryGroup& group, std::span<const double> scores,
                         std::span<const std::size_t> block, double log_mass, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i : block) axpy(std::exp(scores[i] - log_mass), group.docs[i], out);
}

}  // namespace detail

inline StageAccumulators fd_accumulate(const QueryGroup& group, const OrderedPartition& part,
                                       std::span<const double> scores, bool with_centres) {
  const std::size_t K = part.block_count();
  const std::size_t F = group.feature_count();
  StageAccumulators acc;
  acc.feature_count = with_centres ? F : 0;
  acc.log_a.resize(K);
  acc.log_block.resize(K);
  if (with_centres) acc.centre.assign(K * F, 0.0);

  std::vector<double> block_mean(with_centres ? F : 0);
  for (std::size_t step = 0; step < K; ++step) {
    const std::size_t k = K - 1 - step;
    const double lb = log_sum_exp(scores, part[k]);
    acc.log_block[k] = lb;
    acc.log_a[k] = (k + 1 < K) ? log_add_exp(acc.log_a[k + 1], lb) : lb;
    if (!with_centres) continue;

    detail::block_centre(group, scores, part[k], lb, block_mean);
    std::span<double> row(acc.centre.data() + k * F, F);
    const double w_block = std::exp(lb - acc.log_a[k]);
    if (k + 1 < K) {
      const double w_rest = std::exp(acc.log_a[k + 1] - acc.log_a[k]);
      const auto next = acc.centre_row(k + 1);
      for (std::size_t f = 0; f < F; ++f) row[f] = w_rest * next[f] + w_block * block_mean[f];
    } else {
      std::copy(block_mean.begin(), block_mean.end(), row.begin());
    }
  }
  return acc;
}

/// Log-likelihood with the per-stage constant log(C_k |X_k|) dropped:
/// sum_k log( sum_{X_k} phi / sum_{R_k} phi ).
inline double fd_loglik(const QueryGroup& group, const OrderedPartition& part, std::span<const double> w) {
  detail::check_inputs(group, part, w);
  const ScoreCache cache(group, w);
  const auto acc = fd_accumulate(group, part, cache.scores, false);
  double ll = 0.0;
  for (std::size_t k = 0; k < part.block_count(); ++k) ll += acc.log_block[k] - acc.log_a[k];
  return ll;
}

/// Exact log-probability of the ordered partition, constant included.
inline double fd_loglik_exact(const QueryGroup& group, const OrderedPartition& part, std::span<const double> w) {
  double ll = fd_loglik(group, part, w);
  std::size_t remaining = group.size();
  for (const auto& block : part.blocks()) {
    ll -= log_constant_c(remaining) + std::log(static_cast<double>(block.size()));
    remaining -= block.size();
  }
  return ll;
}

/// Log-likelihood and its gradient in one backward pass. `grad` is overwritten.
inline double fd_value_and_gradient(const QueryGroup& group, const OrderedPartition& part,
                                    std::span<const double> w, std::span<double> grad) {
  detail::check_inputs(group, part, w);
  require_same_size(grad.size(), w.size(), "gradient");
  const ScoreCache cache(group, w);
  const auto acc = fd_accumulate(group, part, cache.scores, true);

  std::fill(grad.begin(), grad.end(), 0.0);
  double ll = 0.0;
  for (std::size_t k = 0; k < part.block_count(); ++k) {
    ll += acc.log_block[k] - acc.log_a[k];
    for (std::size_t i : part[k]) axpy(std::exp(cache.scores[i] - acc.log_block[k]), group.docs[i], grad);
    axpy(-1.0, acc.centre_row(k), grad);
  }
  return ll;
}

inline std::vector<double> fd_gradient(const QueryGroup& group, const OrderedPartition& part,
                                       std::span<const double> w) {
  std::vector<double> grad(w.size());
  fd_value_and_gradient(group, part, w, grad);
  return grad;
}

// Quadratic-time references: every stage recomputes its remainder sums from
// scratch.

inline double fd_loglik_naive(const QueryGroup& group, const OrderedPartition& part, std::span<const double> w) {
  detail::check_inputs(group, part, w);
  std::vector<double> f;
  for (const auto& x : group.docs) f.push_back(score(x, w));

  double ll = 0.0;
  for (std::size_t k = 0; k < part.block_count(); ++k) {
    std::vector<std::size_t> remainder;
    for (std::size_t j = k; j < part.block_count(); ++j) remainder.insert(remainder.end(), part[j].begin(), part[j].end());
    ll += log_sum_exp(f, part[k]) - log_sum_exp(f, remainder);
  }
  return ll;
}

inline std::vector<double> fd_gradient_naive(const QueryGroup& group, const OrderedPartition& part,
                                             std::span<const double> w) {
  detail::check_inputs(group, part, w);
  std::vector<double> f;
  for (const auto& x : group.docs) f.push_back(score(x, w));

  std::vector<double> grad(w.size(), 0.0);
  for (std::size_t k = 0; k < part.block_count(); ++k) {
    std::vector<std::size_t> remainder;
    for (std::size_t j = k; j < part.block_count(); ++j) remainder.insert(remainder.end(), part[j].begin(), part[j].end());
    const double lb = log_sum_exp(f, part[k]);
    const double la = log_sum_exp(f, remainder);
    for (std::size_t i : part[k]) axpy(std::exp(f[i] - lb), group.docs[i], grad);
    for (std::size_t i : remainder) axpy(-std::exp(f[i] - la), group.docs[i], grad);
  }
  return grad;
}

}  // namespace pmop
