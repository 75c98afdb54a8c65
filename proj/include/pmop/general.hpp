#pragma once

// General-state model: a block's potential is exp of the mean member score.
// Stage normalisers have no closed form, so training uses short MCMC chains
// started at the observed block (contrastive divergence). Exact enumeration
// over subsets is provided for small remainders and serves as the reference.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"
#include "random.hpp"
#include "scoring.hpp"

namespace pmop {

inline constexpr std::size_t kMaxExactRemainder = 20;
inline constexpr std::size_t kMaxExactGradientQuery = 12;

/// Mean score over the block: the log of the block potential.
inline double block_log_potential(std::span<const std::size_t> block, std::span<const double> scores) {
  if (block.empty()) throw std::invalid_argument("block_log_potential: empty block");
  double s = 0.0;
  for (std::size_t i : block) s += scores[i];
  return s / static_cast<double>(block.size());
}

inline double block_log_potential(std::span<const std::size_t> block, const QueryGroup& group,
                                  std::span<const double> w) {
  return block_log_potential(block, ScoreCache(group, w).scores);
}

/// Mean feature vector of a block.
inline std::vector<double> block_centre(std::span<const std::size_t> block, const QueryGroup& group) {
  std::vector<double> c(group.feature_count(), 0.0);
  const double inv = 1.0 / static_cast<double>(block.size());
  for (std::size_t i : block) axpy(inv, group.docs[i], c);
  return c;
}

/// Distribution over every non-empty subset of a remainder set. Subsets are
/// bitmasks over positions in `remainder`; entry `mask - 1` holds the subset
/// `mask`.
struct StageDistribution {
  std::vector<std::size_t> remainder;
  std::vector<double> probability;
  double log_normalizer = 0.0;

  std::size_t subset_count() const noexcept { return probability.size(); }

  double operator()(std::uint32_t mask) const { return probability.at(mask - 1); }

  std::vector<std::size_t> subset(std::uint32_t mask) const {
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < remainder.size(); ++p)
      if (mask & (1u << p)) out.push_back(remainder[p]);
    return out;
  }

  std::uint32_t mask_of(std::span<const std::size_t> block) const {
    std::uint32_t mask = 0;
    for (std::size_t i : block) {
      auto it = std::lower_bound(remainder.begin(), remainder.end(), i);
      if (it == remainder.end() || *it != i) throw std::invalid_argument("block is not inside the remainder");
      mask |= 1u << static_cast<std::size_t>(it - remainder.begin());
    }
    return mask;
  }
};

inline StageDistribution exact_stage_distribution(std::vector<std::size_t> remainder, std::span<const double> scores) {
  if (remainder.empty()) throw std::invalid_argument("exact_stage_distribution: empty remainder");
  if (remainder.size() > kMaxExactRemainder) {
    throw std::invalid_argument("exact_stage_distribution: remainder of " + std::to_string(remainder.size()) +
                                " objects exceeds the enumeration limit of " + std::to_string(kMaxExactRemainder));
  }
  std::sort(remainder.begin(), remainder.end());
  const std::size_t n = remainder.size();
  const std::uint32_t full = (1u << n) - 1u;

  StageDistribution dist;
  dist.remainder = std::move(remainder);
  std::vector<double> logphi(full);
  std::vector<double> sums(full + 1, 0.0);
  std::vector<int> counts(full + 1, 0);
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    const int low = std::countr_zero(mask);
    const std::uint32_t rest = mask & (mask - 1);
    sums[mask] = sums[rest] + scores[dist.remainder[static_cast<std::size_t>(low)]];
    counts[mask] = counts[rest] + 1;
    logphi[mask - 1] = sums[mask] / counts[mask];
  }
  dist.log_normalizer = log_sum_exp(logphi);
  dist.probability.resize(full);
  for (std::uint32_t m = 0; m < full; ++m) dist.probability[m] = std::exp(logphi[m] - dist.log_normalizer);
  return dist;
}

inline StageDistribution exact_stage_distribution(std::vector<std::size_t> remainder, const QueryGroup& group,
                                                  std::span<const double> w) {
  return exact_stage_distribution(std::move(remainder), ScoreCache(group, w).scores);
}

namespace detail {

inline std::vector<std::size_t> remainder_at(const OrderedPartition& part, std::size_t k) {
  std::vector<std::size_t> r;
  for (std::size_t j = k; j < part.block_count(); ++j) r.insert(r.end(), part[j].begin(), part[j].end());
  std::sort(r.begin(), r.end());
  return r;
}

}  // namespace detail

/// Exact log-likelihood under the mean-score block potential, by enumeration.
inline double exact_general_loglik(const QueryGroup& group, const OrderedPartition& part, std::span<const double> w) {
  if (part.object_count() != group.size()) throw DimensionError("ordered partition does not match query size");
  const ScoreCache cache(group, w);
  double ll = 0.0;
  for (std::size_t k = 0; k < part.block_count(); ++k) {
    auto dist = exact_stage_distribution(detail::remainder_at(part, k), cache.scores);
    ll += block_log_potential(part[k], cache.scores) - dist.log_normalizer;
  }
  return ll;
}

/// Exact gradient sum_k [ centre(X_k) - E_{S ~ p_k} centre(S) ].
inline std::vector<double> exact_general_gradient(const QueryGroup& group, const OrderedPartition& part,
                                                  std::span<const double> w) {
  if (group.size() > kMaxExactGradientQuery) {
    throw std::invalid_argument("exact_general_gradient: query of " + std::to_string(group.size()) +
                                " documents exceeds the limit of " + std::to_string(kMaxExactGradientQuery));
  }
  if (part.object_count() != group.size()) throw DimensionError("ordered partition does not match query size");
  const ScoreCache cache(group, w);
  std::vector<double> grad(w.size(), 0.0);
  for (std::size_t k = 0; k < part.block_count(); ++k) {
    const auto observed = block_centre(part[k], group);
    axpy(1.0, observed, grad);

    const auto dist = exact_stage_distribution(detail::remainder_at(part, k), cache.scores);
    const std::size_t n = dist.remainder.size();
    // E[centre(S)] = sum_i x_i * sum_{S containing i} p(S) / |S|
    std::vector<double> weight(n, 0.0);
    for (std::uint32_t mask = 1; mask <= dist.subset_count(); ++mask) {
      const double share = dist(mask) / std::popcount(mask);
      for (std::size_t p = 0; p < n; ++p)
        if (mask & (1u << p)) weight[p] += share;
    }
    for (std::size_t p = 0; p < n; ++p) axpy(-weight[p], group.docs[dist.remainder[p]], grad);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Samplers

enum class Sampler { gibbs, mh };

// verbatim: accept with min{1, Phi(S)/Phi(X)} as in the original algorithm.
// corrected: multiply by the proposal-density ratio so the chain targets the
// stage distribution exactly.
enum class MhAcceptance { verbatim, corrected };

inline Sampler parse_sampler(std::string_view name) {
  if (name == "gibbs") return Sampler::gibbs;
  if (name == "mh") return Sampler::mh;
  throw std::invalid_argument("unknown sampler '" + std::string(name) + "' (expected gibbs or mh)");
}

struct ChainState {
  std::vector<std::size_t> remainder;  // ascending document indices of R_k
  std::vector<char> selected;          // membership, aligned with remainder
  Rng rng;

  ChainState(std::vector<std::size_t> remainder_set, std::span<const std::size_t> initial, Rng stream)
      : remainder(std::move(remainder_set)), selected(remainder.size(), 0), rng(std::move(stream)) {
    std::sort(remainder.begin(), remainder.end());
    if (initial.empty()) throw std::invalid_argument("chain state: initial block must be non-empty");
    for (std::size_t i : initial) {
      auto it = std::lower_bound(remainder.begin(), remainder.end(), i);
      if (it == remainder.end() || *it != i) throw std::invalid_argument("chain state: block outside remainder");
      selected[static_cast<std::size_t>(it - remainder.begin())] = 1;
    }
  }

  std::size_t count() const { return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), 1)); }

  std::vector<std::size_t> block() const {
    std::vector<std::size_t> b;
    for (std::size_t p = 0; p < remainder.size(); ++p)
      if (selected[p]) b.push_back(remainder[p]);
    return b;
  }

  std::uint32_t mask() const {
    std::uint32_t m = 0;
    for (std::size_t p = 0; p < selected.size() && p < 32; ++p)
      if (selected[p]) m |= 1u << p;
    return m;
  }
};

/// One Gibbs sweep over R_k in ascending document order. A flip that would
/// empty the block is never made.
inline void gibbs_step(ChainState& state, std::span<const double> scores) {
  const std::size_t n = state.remainder.size();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (state.selected[p]) {
      sum += scores[state.remainder[p]];
      ++count;
    }
  }
  for (std::size_t p = 0; p < n; ++p) {
    const double s = scores[state.remainder[p]];
    const double others_sum = state.selected[p] ? sum - s : sum;
    const std::size_t others = state.selected[p] ? count - 1 : count;
    bool include = true;
    if (others > 0) {
      const double with = (others_sum + s) / static_cast<double>(others + 1);
      const double without = others_sum / static_cast<double>(others);
      include = uniform01(state.rng) < sigmoid(with - without);
    }
    if (include != static_cast<bool>(state.selected[p])) {
      state.selected[p] = include ? 1 : 0;
      sum = include ? others_sum + s : others_sum;
      count = include ? others + 1 : others;
    }
  }
}

namespace detail {

inline double log_binomial(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
         std::lgamma(static_cast<double>(n - k) + 1);
}

}  // namespace detail

/// One Metropolis-Hastings step: draw m uniformly from {1..N_k}, then a
/// uniform m-subset of R_k, and accept or keep the current block.
inline void mh_step(ChainState& state, std::span<const double> scores,
                    MhAcceptance acceptance = MhAcceptance::verbatim) {
  const std::size_t n = state.remainder.size();
  const std::size_t m = std::uniform_int_distribution<std::size_t>(1, n)(state.rng);

  std::vector<std::size_t> positions(n);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, n - 1)(state.rng);
    std::swap(positions[i], positions[j]);
  }

  double proposed = 0.0;
  for (std::size_t i = 0; i < m; ++i) proposed += scores[state.remainder[positions[i]]];
  proposed /= static_cast<double>(m);

  double current = 0.0;
  std::size_t current_size = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (state.selected[p]) {
      current += scores[state.remainder[p]];
      ++current_size;
    }
  }
  current /= static_cast<double>(current_size);

  double log_ratio = proposed - current;
  if (acceptance == MhAcceptance::corrected) {
    log_ratio += detail::log_binomial(n, m) - detail::log_binomial(n, current_size);
  }
  if (log_ratio >= 0.0 || uniform01(state.rng) < std::exp(log_ratio)) {
    std::fill(state.selected.begin(), state.selected.end(), 0);
    for (std::size_t i = 0; i < m; ++i) state.selected[positions[i]] = 1;
  }
}

struct CdConfig {
  std::size_t n_samples = 1;
  std::size_t mcmc_steps = 1;
  Sampler sampler = Sampler::gibbs;
  MhAcceptance mh_acceptance = MhAcceptance::verbatim;
};

inline void advance(ChainState& state, std::span<const double> scores, const CdConfig& cfg) {
  for (std::size_t s = 0; s < cfg.mcmc_steps; ++s) {
    if (cfg.sampler == Sampler::gibbs) {
      gibbs_step(state, scores);
    } else {
      mh_step(state, scores, cfg.mh_acceptance);
    }
  }
}

/// Contrastive-divergence estimate of the log-likelihood gradient:
/// sum_k ( centre(X_k) - mean_l centre(S_k^(l)) ). Each sample restarts its
/// chain at the observed block and runs `mcmc_steps` transitions; the random
/// stream for stage k is keyed by (seed, query id, k, epoch).
inline std::vector<double> cd_gradient_estimate(const QueryGroup& group, const OrderedPartition& part,
                                                std::span<const double> w, const CdConfig& cfg,
                                                std::uint64_t seed, std::uint64_t epoch = 0) {
  if (cfg.n_samples < 1) throw std::invalid_argument("cd_gradient_estimate: n_samples must be >= 1");
  if (cfg.mcmc_steps < 1) throw std::invalid_argument("cd_gradient_estimate: mcmc_steps must be >= 1");
  if (part.object_count() != group.size()) throw DimensionError("ordered partition does not match query size");
  for (const auto& x : group.docs) require_same_size(x.size(), w.size(), "weights");

  const ScoreCache cache(group, w);
  const std::size_t F = w.size();
  std::vector<double> grad(F, 0.0);
  std::vector<double> sampled(F);
  for (std::size_t k = 0; k < part.block_count(); ++k) {
    auto remainder = detail::remainder_at(part, k);
    if (remainder.size() < 2) continue;

    axpy(1.0, block_centre(part[k], group), grad);
    std::fill(sampled.begin(), sampled.end(), 0.0);
    Rng rng = stream_for(seed, group.query_id, k, epoch);
    for (std::size_t l = 0; l < cfg.n_samples; ++l) {
      ChainState state(remainder, part[k], std::move(rng));
      advance(state, cache.scores, cfg);
      axpy(1.0, block_centre(state.block(), group), sampled);
      rng = std::move(state.rng);
    }
    axpy(-1.0 / static_cast<double>(cfg.n_samples), sampled, grad);
  }
  return grad;
}

/// Monte-Carlo estimate of the general log-likelihood. Each stage normaliser
/// is estimated as (2^N_k - 1) times the mean potential of `samples` uniform
/// non-empty subsets (exact when N_k <= 8).
inline double mc_general_loglik(const QueryGroup& group, const OrderedPartition& part, std::span<const double> w,
                                std::uint64_t seed, std::uint64_t epoch, std::size_t samples = 16) {
  const ScoreCache cache(group, w);
  double ll = 0.0;
  for (std::size_t k = 0; k < part.block_count(); ++k) {
    auto remainder = detail::remainder_at(part, k);
    ll += block_log_potential(part[k], cache.scores);
    if (remainder.size() <= 8) {
      ll -= exact_stage_distribution(std::move(remainder), cache.scores).log_normalizer;
      continue;
    }
    Rng rng = stream_for(seed, group.query_id, k, epoch, /*purpose=*/1);
    std::vector<double> logphi;
    logphi.reserve(samples);
    std::vector<std::size_t> subset;
    while (logphi.size() < samples) {
      subset.clear();
      for (std::size_t i : remainder)
        if (rng() & 1u) subset.push_back(i);
      if (!subset.empty()) logphi.push_back(block_log_potential(subset, cache.scores));
    }
    const double n = static_cast<double>(remainder.size());
    const double log_subsets = n * std::log(2.0) + std::log1p(-std::exp2(-n));
    ll -= log_subsets + log_sum_exp(logphi) - std::log(static_cast<double>(samples));
  }
  return ll;
}

}  // namespace pmop
