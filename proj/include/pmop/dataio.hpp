#pragma once

// LETOR / SVMlight-with-qid ingestion and the feature pipeline: z-score
// normalisation fitted on training data, and second-order (product) features
// chosen by their Pearson correlation with the label.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "core.hpp"
#include "random.hpp"
#include "text.hpp"

namespace pmop {

struct ParseError : DataError {
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_number(line) {}
  explicit ParseError(const std::string& what) : DataError(what) {}

  std::size_t line_number = 0;
};

/// Reads `<label> qid:<id> <idx>:<val> ... [# comment]` lines. Feature indices
/// are 1-based and densified to the largest index seen; documents are grouped
/// by qid in order of first appearance.
inline Dataset parse_letor(std::istream& in, const std::string& source = "<input>") {
  struct Row {
    Label label;
    std::vector<std::pair<std::size_t, double>> features;
  };
  std::vector<std::string> qids;
  std::unordered_map<std::string, std::size_t> qid_index;
  std::vector<std::vector<Row>> rows;
  std::size_t max_index = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    const auto tokens = split_ws(view);
    if (tokens.empty()) continue;

    const auto label = parse_int<Label>(tokens[0]);
    if (!label) throw ParseError(source, line_no, "non-integer label '" + std::string(tokens[0]) + "'");
    if (*label < 0) throw ParseError(source, line_no, "negative label " + std::to_string(*label));
    if (tokens.size() < 2 || !tokens[1].starts_with("qid:") || tokens[1].size() == 4) {
      throw ParseError(source, line_no, "malformed line: expected 'qid:<id>' after the label");
    }
    const std::string qid(tokens[1].substr(4));

    Row row{*label, {}};
    for (std::size_t t = 2; t < tokens.size(); ++t) {
      const auto colon = tokens[t].find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(source, line_no, "malformed feature '" + std::string(tokens[t]) + "'");
      }
      const auto idx = parse_int<std::size_t>(tokens[t].substr(0, colon));
      const auto val = parse_real(tokens[t].substr(colon + 1));
      if (!idx || *idx == 0 || !val) {
        throw ParseError(source, line_no, "malformed feature '" + std::string(tokens[t]) + "'");
      }
      for (const auto& [seen, v] : row.features) {
        if (seen == *idx) throw ParseError(source, line_no, "duplicate feature index " + std::to_string(*idx));
      }
      row.features.emplace_back(*idx, *val);
      max_index = std::max(max_index, *idx);
    }

    auto [it, inserted] = qid_index.try_emplace(qid, qids.size());
    if (inserted) {
      qids.push_back(qid);
      rows.emplace_back();
    }
    rows[it->second].push_back(std::move(row));
  }
  if (qids.empty()) throw ParseError(source + ": no documents");

  Dataset ds;
  ds.feature_count = max_index;
  for (std::size_t q = 0; q < qids.size(); ++q) {
    QueryGroup g;
    g.query_id = qids[q];
    for (auto& row : rows[q]) {
      FeatureVector x(max_index, 0.0);
      for (const auto& [idx, v] : row.features) x[idx - 1] = v;
      g.docs.push_back(std::move(x));
      g.labels.push_back(row.label);
    }
    ds.groups.push_back(std::move(g));
  }
  return ds;
}

inline Dataset parse_letor_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  return parse_letor(in, path);
}

/// Writes every feature (zeros included) so the dimension survives a round trip.
inline void write_letor(std::ostream& out, const Dataset& ds) {
  for (const auto& g : ds.groups) {
    for (std::size_t d = 0; d < g.size(); ++d) {
      out << g.labels[d] << " qid:" << g.query_id;
      for (std::size_t f = 0; f < g.docs[d].size(); ++f) out << ' ' << (f + 1) << ':' << format_real(g.docs[d][f]);
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Feature pipeline

inline constexpr double kMinStddev = 1e-12;

struct FeaturePipeline {
  std::size_t first_order = 0;
  // One entry per output feature: the first-order features, then one per pair.
  std::vector<double> means;
  std::vector<double> stddevs;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // 0-based, i <= j
  double corr_threshold = 0.15;

  std::size_t output_features() const { return first_order + pairs.size(); }

  friend bool operator==(const FeaturePipeline& a, const FeaturePipeline& b) {
    return a.first_order == b.first_order && a.means == b.means && a.stddevs == b.stddevs && a.pairs == b.pairs;
  }
};

namespace detail {

inline double zscore(double v, double mean, double sd) { return sd < kMinStddev ? 0.0 : (v - mean) / sd; }

// Population mean and standard deviation of one column.
inline std::pair<double, double> moments(std::span<const double> col) {
  const double n = static_cast<double>(col.size());
  const double mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
  double var = 0.0;
  for (double v : col) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const auto [mx, sx] = moments(x);
  const auto [my, sy] = moments(y);
  if (sx < kMinStddev || sy < kMinStddev) return 0.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) cov += (x[i] - mx) * (y[i] - my);
  return cov / static_cast<double>(x.size()) / (sx * sy);
}

template <class Fn>
Dataset map_documents(const Dataset& ds, std::size_t out_features, Fn&& fn) {
  Dataset out;
  out.feature_count = out_features;
  out.groups.reserve(ds.groups.size());
  for (const auto& g : ds.groups) {
    QueryGroup q{g.query_id, {}, g.labels};
    q.docs.reserve(g.size());
    for (const auto& x : g.docs) q.docs.push_back(fn(x));
    out.groups.push_back(std::move(q));
  }
  return out;
}

}  // namespace detail

inline FeaturePipeline fit_normalizer(const Dataset& train) {
  if (train.document_count() == 0) throw DataError("fit_normalizer: no training documents");
  FeaturePipeline p;
  p.first_order = train.feature_count;
  std::vector<double> col;
  col.reserve(train.document_count());
  for (std::size_t f = 0; f < train.feature_count; ++f) {
    col.clear();
    for (const auto& g : train.groups)
      for (const auto& x : g.docs) col.push_back(x[f]);
    const auto [m, s] = detail::moments(col);
    p.means.push_back(m);
    p.stddevs.push_back(s);
  }
  return p;
}

/// First-order z-scores only; features with zero spread become 0.
inline Dataset apply_normalizer(const FeaturePipeline& p, const Dataset& ds) {
  if (ds.feature_count != p.first_order) {
    throw DimensionError("pipeline expects " + std::to_string(p.first_order) + " features, data has " +
                         std::to_string(ds.feature_count));
  }
  return detail::map_documents(ds, p.first_order, [&](const FeatureVector& x) {
    FeatureVector z(p.first_order);
    for (std::size_t f = 0; f < p.first_order; ++f) z[f] = detail::zscore(x[f], p.means[f], p.stddevs[f]);
    return z;
  });
}

inline double product_correlation(const Dataset& normalized_train, std::size_t i, std::size_t j) {
  std::vector<double> prod, labels;
  for (const auto& g : normalized_train.groups) {
    for (std::size_t d = 0; d < g.size(); ++d) {
      prod.push_back(g.docs[d][i] * g.docs[d][j]);
      labels.push_back(static_cast<double>(g.labels[d]));
    }
  }
  return detail::pearson(prod, labels);
}

/// Selects products v_i * v_j (i <= j) of normalised first-order features whose
/// absolute Pearson correlation with the pooled document labels exceeds
/// `threshold`, and fits z-score statistics for them. Only the training split
/// is ever read.
inline FeaturePipeline build_second_order(const Dataset& normalized_train, FeaturePipeline p, double threshold) {
  if (!(threshold >= 0.0 && threshold < 1.0)) throw std::invalid_argument("correlation threshold must be in [0, 1)");
  if (normalized_train.feature_count != p.first_order) throw DimensionError("pipeline/dataset feature mismatch");
  p.corr_threshold = threshold;
  p.pairs.clear();
  p.means.resize(p.first_order);
  p.stddevs.resize(p.first_order);

  const std::size_t F = p.first_order;
  std::vector<double> labels;
  for (const auto& g : normalized_train.groups)
    for (Label l : g.labels) labels.push_back(static_cast<double>(l));

  std::vector<double> prod(labels.size());
  for (std::size_t i = 0; i < F; ++i) {
    for (std::size_t j = i; j < F; ++j) {
      std::size_t n = 0;
      for (const auto& g : normalized_train.groups)
        for (const auto& x : g.docs) prod[n++] = x[i] * x[j];
      if (std::abs(detail::pearson(prod, labels)) > threshold) {
        const auto [m, s] = detail::moments(prod);
        p.pairs.emplace_back(i, j);
        p.means.push_back(m);
        p.stddevs.push_back(s);
      }
    }
  }
  return p;
}

/// Full transform of raw data: first-order z-scores followed by the selected
/// normalised products.
inline Dataset transform(const FeaturePipeline& p, const Dataset& raw) {
  if (raw.feature_count != p.first_order) {
    throw DimensionError("pipeline expects " + std::to_string(p.first_order) + " features, data has " +
                         std::to_string(raw.feature_count));
  }
  return detail::map_documents(raw, p.output_features(), [&](const FeatureVector& x) {
    FeatureVector z(p.output_features());
    for (std::size_t f = 0; f < p.first_order; ++f) z[f] = detail::zscore(x[f], p.means[f], p.stddevs[f]);
    for (std::size_t k = 0; k < p.pairs.size(); ++k) {
      const auto [i, j] = p.pairs[k];
      const std::size_t out = p.first_order + k;
      z[out] = detail::zscore(z[i] * z[j], p.means[out], p.stddevs[out]);
    }
    return z;
  });
}

inline void save_pipeline(std::ostream& out, const FeaturePipeline& p) {
  out << "feature-pipeline v1\n";
  out << "F " << p.first_order << "\n";
  for (const auto& [i, j] : p.pairs) out << "pair " << (i + 1) << ' ' << (j + 1) << "\n";
  for (std::size_t f = 0; f < p.output_features(); ++f) out << "mean " << (f + 1) << ' ' << format_real(p.means[f]) << "\n";
  for (std::size_t f = 0; f < p.output_features(); ++f) out << "std " << (f + 1) << ' ' << format_real(p.stddevs[f]) << "\n";
}

inline FeaturePipeline load_pipeline(std::istream& in, const std::string& source = "<pipeline>") {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || split_ws(line) != std::vector<std::string_view>{"feature-pipeline", "v1"}) {
    throw ParseError(source, 1, "expected header 'feature-pipeline v1'");
  }
  FeaturePipeline p;
  bool have_f = false;
  std::vector<std::pair<std::size_t, double>> means, stds;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    auto bad = [&] { return ParseError(source, line_no, "malformed pipeline line '" + line + "'"); };
    if (tok[0] == "F" && tok.size() == 2) {
      auto f = parse_int<std::size_t>(tok[1]);
      if (!f) throw bad();
      p.first_order = *f;
      have_f = true;
    } else if (tok[0] == "pair" && tok.size() == 3) {
      auto i = parse_int<std::size_t>(tok[1]);
      auto j = parse_int<std::size_t>(tok[2]);
      if (!i || !j || *i == 0 || *j == 0 || *i > *j) throw bad();
      p.pairs.emplace_back(*i - 1, *j - 1);
    } else if ((tok[0] == "mean" || tok[0] == "std") && tok.size() == 3) {
      auto idx = parse_int<std::size_t>(tok[1]);
      auto v = parse_real(tok[2]);
      if (!idx || *idx == 0 || !v) throw bad();
      (tok[0] == "mean" ? means : stds).emplace_back(*idx - 1, *v);
    } else {
      throw bad();
    }
  }
  if (!have_f) throw ParseError(source + ": missing 'F' line");
  const std::size_t out = p.output_features();
  for (const auto& [i, j] : p.pairs)
    if (j >= p.first_order) throw ParseError(source + ": pair references a feature beyond F");
  p.means.assign(out, 0.0);
  p.stddevs.assign(out, 0.0);
  if (means.size() != out || stds.size() != out) throw ParseError(source + ": expected one mean and std per feature");
  for (const auto& [i, v] : means) {
    if (i >= out) throw ParseError(source + ": mean index out of range");
    p.means[i] = v;
  }
  for (const auto& [i, v] : stds) {
    if (i >= out || v < 0.0) throw ParseError(source + ": bad std entry");
    p.stddevs[i] = v;
  }
  return p;
}

/// Query-level split into (train, test); each side keeps the original query order.
inline std::pair<Dataset, Dataset> split_queries(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train fraction must be in (0, 1)");
  const std::size_t n = ds.groups.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw std::invalid_argument("train fraction " + format_real(train_fraction) + " leaves one side of a " +
                                std::to_string(n) + "-query split empty");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(splitmix64(seed));
  std::shuffle(idx.begin(), idx.end(), rng);
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());

  std::pair<Dataset, Dataset> out;
  out.first.feature_count = out.second.feature_count = ds.feature_count;
  for (std::size_t k = 0; k < n; ++k) (k < n_train ? out.first : out.second).groups.push_back(ds.groups[idx[k]]);
  return out;
}

}  // namespace pmop
