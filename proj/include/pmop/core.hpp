#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pmop {

// Error hierarchy. The CLI maps each family onto its own exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (dimension mismatch, bad file).
struct DataError : Error {
  using Error::Error;
};

struct DimensionError : DataError {
  using DataError::DataError;
};

// Non-finite objective, gradient or update.
struct NumericError : Error {
  NumericError(const std::string& what, std::string query)
      : Error(what + (query.empty() ? std::string{} : " (query " + query + ")")),
        query_id(std::move(query)) {}
  explicit NumericError(const std::string& what) : Error(what) {}

  std::string query_id;
};

using FeatureVector = std::vector<double>;
using WeightVector = std::vector<double>;
using Label = int;

struct QueryGroup {
  std::string query_id;
  std::vector<FeatureVector> docs;
  std::vector<Label> labels;

  std::size_t size() const noexcept { return docs.size(); }
  std::size_t feature_count() const noexcept { return docs.empty() ? 0 : docs.front().size(); }

  friend bool operator==(const QueryGroup&, const QueryGroup&) = default;
};

struct Dataset {
  std::size_t feature_count = 0;
  std::vector<QueryGroup> groups;

  std::size_t document_count() const noexcept {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// A sequence of disjoint, non-empty index blocks whose union is {0..n-1},
/// best block first. Indices inside a block are kept ascending.
class OrderedPartition {
 public:
  OrderedPartition() = default;

  /// Validates the structural invariants and canonicalises block order.
  OrderedPartition(std::vector<std::vector<std::size_t>> blocks, std::size_t n)
      : blocks_(std::move(blocks)), n_(n) {
    std::vector<char> seen(n, 0);
    std::size_t total = 0;
    for (auto& b : blocks_) {
      if (b.empty()) throw std::invalid_argument("ordered partition: empty block");
      std::sort(b.begin(), b.end());
      for (std::size_t i : b) {
        if (i >= n) throw std::invalid_argument("ordered partition: index out of range");
        if (seen[i]) throw std::invalid_argument("ordered partition: blocks overlap");
        seen[i] = 1;
      }
      total += b.size();
    }
    if (total != n) throw std::invalid_argument("ordered partition: blocks do not cover all objects");
  }

  const std::vector<std::vector<std::size_t>>& blocks() const noexcept { return blocks_; }
  std::size_t block_count() const noexcept { return blocks_.size(); }
  std::size_t object_count() const noexcept { return n_; }
  const std::vector<std::size_t>& operator[](std::size_t k) const { return blocks_[k]; }

  friend bool operator==(const OrderedPartition&, const OrderedPartition&) = default;
  friend auto operator<=>(const OrderedPartition& a, const OrderedPartition& b) {
    if (auto c = a.n_ <=> b.n_; c != 0) return c;
    return a.blocks_ <=> b.blocks_;
  }

 private:
  std::vector<std::vector<std::size_t>> blocks_;
  std::size_t n_ = 0;
};

/// Groups documents by label, highest label first. Label gaps produce no
/// empty blocks.
inline OrderedPartition partition_by_labels(const QueryGroup& group) {
  std::vector<Label> distinct(group.labels);
  std::sort(distinct.begin(), distinct.end(), std::greater<>{});
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<std::vector<std::size_t>> blocks(distinct.size());
  for (std::size_t i = 0; i < group.labels.size(); ++i) {
    auto it = std::lower_bound(distinct.begin(), distinct.end(), group.labels[i], std::greater<>{});
    blocks[static_cast<std::size_t>(it - distinct.begin())].push_back(i);
  }
  return OrderedPartition(std::move(blocks), group.labels.size());
}

struct Violation {
  std::string query_id;
  std::string description;
};

inline std::vector<Violation> validate_dataset(const Dataset& ds) {
  std::vector<Violation> out;
  for (const auto& g : ds.groups) {
    if (g.docs.empty()) out.push_back({g.query_id, "empty query group"});
    if (g.docs.size() != g.labels.size()) {
      out.push_back({g.query_id, "document count " + std::to_string(g.docs.size()) +
                                     " differs from label count " + std::to_string(g.labels.size())});
    }
    for (std::size_t d = 0; d < g.docs.size(); ++d) {
      const auto& x = g.docs[d];
      if (x.size() != ds.feature_count) {
        out.push_back({g.query_id, "document " + std::to_string(d) + " has " + std::to_string(x.size()) +
                                       " features, expected " + std::to_string(ds.feature_count)});
      }
      if (std::any_of(x.begin(), x.end(), [](double v) { return !std::isfinite(v); })) {
        out.push_back({g.query_id, "document " + std::to_string(d) + " has a non-finite feature"});
      }
    }
    for (Label l : g.labels) {
      if (l < 0) {
        out.push_back({g.query_id, "negative label " + std::to_string(l)});
        break;
      }
    }
  }
  return out;
}

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
  }
}

}  // namespace pmop
