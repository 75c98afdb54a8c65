#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "scoring.hpp"
#include "text.hpp"

namespace pmop {

/// Predicted order (best first) and the labels aligned with it, so that
/// `labels[i]` is the grade of the document at position i.
struct RankedList {
  std::vector<std::size_t> order;
  std::vector<Label> labels;
};

/// Documents sorted by descending score; equal scores keep index order.
inline std::vector<std::size_t> rank_by_scores(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

inline RankedList rank_query(const QueryGroup& group, std::span<const double> w) {
  const ScoreCache cache(group, w);
  RankedList list;
  list.order = rank_by_scores(cache.scores);
  for (std::size_t i : list.order) list.labels.push_back(group.labels[i]);
  return list;
}

namespace detail {

inline double dcg(std::span<const Label> labels, std::size_t T) {
  double s = 0.0;
  const std::size_t n = std::min(T, labels.size());
  for (std::size_t i = 0; i < n; ++i) s += (std::exp2(labels[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  return s;
}

}  // namespace detail

/// NDCG truncated at T. A list whose ideal DCG is zero (all grades 0) scores 1.
inline double ndcg_at(const RankedList& list, std::size_t T) {
  if (T < 1) throw std::invalid_argument("ndcg_at: T must be >= 1");
  std::vector<Label> ideal(list.labels);
  std::sort(ideal.begin(), ideal.end(), std::greater<>{});
  const double kappa = detail::dcg(ideal, T);
  if (kappa == 0.0) return 1.0;
  return detail::dcg(list.labels, T) / kappa;
}

/// Expected reciprocal rank with V(r) = (2^r - 1) / 2^max_grade.
inline double err(const RankedList& list, int max_grade = 4) {
  const double denom = std::exp2(max_grade);
  double not_stopped = 1.0;
  double total = 0.0;
  for (std::size_t i = 0; i < list.labels.size(); ++i) {
    const double v = (std::exp2(list.labels[i]) - 1.0) / denom;
    total += not_stopped * v / static_cast<double>(i + 1);
    not_stopped *= 1.0 - v;
  }
  return total;
}

struct EvalReport {
  std::size_t query_count = 0;
  double mean_err = 0.0;
  std::map<std::size_t, double> mean_ndcg;  // keyed by T

  std::string to_key_values() const;
  std::string to_text() const;
};

inline std::string EvalReport::to_key_values() const {
  std::ostringstream os;
  os << "queries=" << query_count << "\n";
  os << "err=" << format_real(mean_err) << "\n";
  for (const auto& [T, v] : mean_ndcg) os << "ndcg@" << T << "=" << format_real(v) << "\n";
  return os.str();
}

inline std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "Evaluated " << query_count << " queries\n";
  os << "  ERR      " << format_real(mean_err) << "\n";
  for (const auto& [T, v] : mean_ndcg) os << "  NDCG@" << T << (T < 10 ? "   " : "  ") << format_real(v) << "\n";
  return os.str();
}

/// Unweighted means over queries of ERR and NDCG@T for every T in `Ts`.
inline EvalReport evaluate(const Dataset& ds, std::span<const double> w, std::span<const std::size_t> Ts,
                           int max_grade = 4) {
  if (ds.groups.empty()) throw std::invalid_argument("evaluate: empty dataset");
  EvalReport report;
  report.query_count = ds.groups.size();
  for (std::size_t T : Ts) report.mean_ndcg[T] = 0.0;
  for (const auto& g : ds.groups) {
    const auto list = rank_query(g, w);
    report.mean_err += err(list, max_grade);
    for (std::size_t T : Ts) report.mean_ndcg[T] += ndcg_at(list, T);
  }
  const double n = static_cast<double>(report.query_count);
  report.mean_err /= n;
  for (auto& [T, v] : report.mean_ndcg) v /= n;
  return report;
}

/// Highest label in the dataset, or 4 when every grade is within 0..4.
inline int grade_ceiling(const Dataset& ds) {
  int m = 4;
  for (const auto& g : ds.groups)
    for (Label l : g.labels) m = std::max(m, l);
  return m;
}

}  // namespace pmop
