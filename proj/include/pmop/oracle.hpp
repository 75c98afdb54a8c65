#pragma once

// Exact combinatorial references. Counting uses arbitrary-precision integers;
// probabilities are enumerated by brute force over every ordered partition and
// every candidate block, independently of the closed forms used in training.

#include <boost/multiprecision/cpp_int.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "constant.hpp"
#include "core.hpp"
#include "scoring.hpp"

namespace pmop {

using BigInt = boost::multiprecision::cpp_int;

inline constexpr std::size_t kMaxEnumeration = 8;
inline constexpr std::size_t kMaxExactModel = 6;

/// Stirling number of the second kind, via S(n,k) = k S(n-1,k) + S(n-1,k-1).
inline BigInt stirling2(std::size_t n, std::size_t k) {
  if (k > n) throw std::invalid_argument("stirling2: k > n");
  std::vector<BigInt> row(k + 1, 0);
  row[0] = 1;  // S(0,0)
  for (std::size_t m = 1; m <= n; ++m) {
    for (std::size_t j = std::min(m, k); j >= 1; --j) row[j] = row[j] * j + row[j - 1];
    row[0] = 0;
  }
  return row[k];
}

/// Number of ordered partitions of an n-set: sum_k S(n,k) k!.
inline BigInt fubini(std::size_t n) {
  if (n < 1) throw std::invalid_argument("fubini: n must be >= 1");
  BigInt total = 0;
  BigInt factorial = 1;
  for (std::size_t k = 1; k <= n; ++k) {
    factorial *= k;
    total += stirling2(n, k) * factorial;
  }
  return total;
}

/// C = (2^n - 1) / n as an exact rational, returned as (numerator, denominator).
inline std::pair<BigInt, BigInt> constant_c_exact(std::size_t n) {
  if (n < 1) throw std::invalid_argument("constant_c: n must be >= 1");
  BigInt num = 1;
  num <<= n;
  num -= 1;
  return {num, BigInt(n)};
}

/// log C, stable for large n.
inline double constant_c(std::size_t n) { return log_constant_c(n); }

/// Lazily yields every ordered partition of {0..n-1}: fewer blocks first, then
/// lexicographically by the sequence of ascending blocks.
class OrderedPartitionEnumeration {
 public:
  explicit OrderedPartitionEnumeration(std::size_t n) : n_(n) {
    if (n < 1) throw std::invalid_argument("enumerate_ordered_partitions: n must be >= 1");
    if (n > kMaxEnumeration) {
      throw std::invalid_argument("enumerate_ordered_partitions: n=" + std::to_string(n) + " exceeds the limit of " +
                                  std::to_string(kMaxEnumeration));
    }
  }

  /// Next partition, or nullopt once exhausted.
  std::optional<OrderedPartition> next() {
    if (done_) return std::nullopt;
    if (!started_) {
      started_ = true;
      blocks_target_ = 1;
      if (!descend()) return std::nullopt;
    } else if (!advance()) {
      return std::nullopt;
    }
    std::vector<std::vector<std::size_t>> blocks;
    for (const auto& lv : levels_) {
      std::vector<std::size_t> b;
      for (std::size_t p : lv.positions) b.push_back(lv.pool[p]);
      blocks.push_back(std::move(b));
    }
    return OrderedPartition(std::move(blocks), n_);
  }

  template <class Visitor>
  void for_each(Visitor&& visit) {
    while (auto p = next()) visit(*p);
  }

  std::size_t object_count() const { return n_; }

 private:
  // One chosen block: ascending positions into the pool of objects still
  // unplaced at that level.
  struct Level {
    std::vector<std::size_t> pool;
    std::vector<std::size_t> positions;
  };

  std::size_t blocks_left(std::size_t depth) const { return blocks_target_ - depth; }

  bool valid(const Level& lv, std::size_t depth) const {
    const std::size_t rest = lv.pool.size() - lv.positions.size();
    const std::size_t left_after = blocks_left(depth) - 1;
    if (left_after == 0) return rest == 0;
    return rest >= left_after;
  }

  // Lexicographic successor of a sorted subset in DFS pre-order.
  static bool step_subset(Level& lv) {
    const std::size_t m = lv.pool.size();
    if (lv.positions.empty()) {
      if (m == 0) return false;
      lv.positions.push_back(0);
      return true;
    }
    if (lv.positions.back() + 1 < m) {
      lv.positions.push_back(lv.positions.back() + 1);
      return true;
    }
    lv.positions.pop_back();
    if (lv.positions.empty()) return false;
    ++lv.positions.back();
    return true;
  }

  bool step_level(std::size_t depth) {
    Level& lv = levels_[depth];
    while (step_subset(lv)) {
      if (valid(lv, depth)) return true;
    }
    return false;
  }

  // Fill levels below the current top with their first valid blocks.
  bool descend() {
    while (true) {
      std::vector<std::size_t> pool;
      if (levels_.empty()) {
        for (std::size_t i = 0; i < n_; ++i) pool.push_back(i);
      } else {
        const Level& top = levels_.back();
        std::vector<char> taken(top.pool.size(), 0);
        for (std::size_t p : top.positions) taken[p] = 1;
        for (std::size_t p = 0; p < top.pool.size(); ++p)
          if (!taken[p]) pool.push_back(top.pool[p]);
      }
      if (levels_.size() == blocks_target_) return true;
      levels_.push_back({std::move(pool), {}});
      if (!step_level(levels_.size() - 1)) {
        levels_.pop_back();
        return advance_from(levels_.size());
      }
    }
  }

  bool advance_from(std::size_t depth) {
    // Step the deepest level above `depth`; pop levels that are exhausted.
    while (depth > 0) {
      --depth;
      levels_.resize(depth + 1);
      if (step_level(depth)) return descend();
    }
    levels_.clear();
    if (++blocks_target_ > n_) {
      done_ = true;
      return false;
    }
    return descend();
  }

  bool advance() { return advance_from(levels_.size()); }

  std::size_t n_;
  std::size_t blocks_target_ = 1;
  std::vector<Level> levels_;
  bool started_ = false;
  bool done_ = false;
};

inline OrderedPartitionEnumeration enumerate_ordered_partitions(std::size_t n) { return OrderedPartitionEnumeration(n); }

enum class PotentialModel { fd, general };

namespace detail {

// log of the block potential: log(mean exp f) for the full decomposition,
// mean f for the general model.
inline double oracle_block_log_potential(std::span<const double> scores, std::uint32_t mask, PotentialModel model) {
  std::vector<double> member;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (mask & (1u << i)) member.push_back(scores[i]);
  const double size = static_cast<double>(member.size());
  if (model == PotentialModel::fd) return log_sum_exp(member) - std::log(size);
  double s = 0.0;
  for (double v : member) s += v;
  return s / size;
}

inline std::uint32_t to_mask(std::span<const std::size_t> block) {
  std::uint32_t m = 0;
  for (std::size_t i : block) m |= 1u << i;
  return m;
}

}  // namespace detail

/// Probability of every ordered partition of the query's documents, each
/// stage normaliser computed by summing over all non-empty subsets.
inline std::map<OrderedPartition, double> exact_model_distribution(const QueryGroup& group, std::span<const double> w,
                                                                   PotentialModel model) {
  const std::size_t n = group.size();
  if (n < 1 || n > kMaxExactModel) {
    throw std::invalid_argument("exact_model_distribution: query of " + std::to_string(n) +
                                " documents outside 1.." + std::to_string(kMaxExactModel));
  }
  std::vector<double> scores;
  for (const auto& x : group.docs) scores.push_back(score(x, w));

  const std::uint32_t full = (1u << n) - 1u;
  std::vector<double> block_lp(full + 1, 0.0);
  for (std::uint32_t m = 1; m <= full; ++m) block_lp[m] = detail::oracle_block_log_potential(scores, m, model);
  // log normaliser for every possible remainder set
  std::vector<double> log_z(full + 1, 0.0);
  for (std::uint32_t r = 1; r <= full; ++r) {
    std::vector<double> terms;
    for (std::uint32_t s = r; s != 0; s = (s - 1) & r) terms.push_back(block_lp[s]);
    log_z[r] = log_sum_exp(terms);
  }

  std::map<OrderedPartition, double> out;
  enumerate_ordered_partitions(n).for_each([&](const OrderedPartition& part) {
    std::uint32_t remainder = full;
    double lp = 0.0;
    for (const auto& block : part.blocks()) {
      const std::uint32_t b = detail::to_mask(block);
      lp += block_lp[b] - log_z[remainder];
      remainder &= ~b;
    }
    out.emplace(part, std::exp(lp));
  });
  return out;
}

/// "{0,2} > {1}"
inline std::string format_partition(const OrderedPartition& part) {
  std::string s;
  for (std::size_t k = 0; k < part.block_count(); ++k) {
    if (k) s += " > ";
    s += '{';
    for (std::size_t i = 0; i < part[k].size(); ++i) {
      if (i) s += ',';
      s += std::to_string(part[k][i]);
    }
    s += '}';
  }
  return s;
}

}  // namespace pmop
