#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "core.hpp"
#include "random.hpp"
#include "scoring.hpp"

namespace pmop {

struct SyntheticSpec {
  std::size_t queries = 200;
  std::size_t docs_per_query = 20;
  std::size_t features = 10;
  double noise = 0.5;  // stddev of the score noise, relative to a unit-norm planted score
  int max_grade = 4;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  Dataset data;
  std::vector<double> planted;  // unit-norm direction
};

/// Gaussian features; each label bins the planted score plus Gaussian noise
/// into max_grade + 1 grades using fixed quantile cut points of the noisy
/// score, so grades repeat heavily within a query.
inline SyntheticData make_synthetic(const SyntheticSpec& spec) {
  Rng rng(splitmix64(spec.seed));
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticData out;
  out.planted.resize(spec.features);
  double norm = 0.0;
  for (double& v : out.planted) {
    v = normal(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : out.planted) v /= norm;

  // The noisy score is N(0, 1 + noise^2); cut it at fixed standard-normal quantiles.
  const double sd = std::sqrt(1.0 + spec.noise * spec.noise);
  std::vector<double> cuts;
  for (int g = 1; g <= spec.max_grade; ++g) {
    // evenly spaced in probability between 0.35 and 0.95
    const double p = 0.35 + 0.6 * (g - 1) / std::max(1, spec.max_grade - 1);
    // inverse normal CDF via bisection on erfc
    double lo = -10.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
    }
    cuts.push_back(0.5 * (lo + hi) * sd);
  }

  out.data.feature_count = spec.features;
  for (std::size_t q = 0; q < spec.queries; ++q) {
    QueryGroup g;
    g.query_id = std::to_string(q + 1);
    for (std::size_t d = 0; d < spec.docs_per_query; ++d) {
      FeatureVector x(spec.features);
      for (double& v : x) v = normal(rng);
      const double s = score(x, out.planted) + spec.noise * normal(rng);
      Label label = 0;
      for (double c : cuts)
        if (s > c) ++label;
      g.docs.push_back(std::move(x));
      g.labels.push_back(label);
    }
    out.data.groups.push_back(std::move(g));
  }
  return out;
}

}  // namespace pmop
