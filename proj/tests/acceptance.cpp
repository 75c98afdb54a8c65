// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "pmop/pmop.hpp"
#include "test_util.hpp"

using namespace pmop;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome combinatorics() {
  Outcome o;
  o.require(fubini(1) == 1, "fubini(1)");
  o.require(fubini(3) == 13, "fubini(3)");
  o.require(fubini(5) == 541, "fubini(5)");
  o.require(fubini(10) == 102247563, "fubini(10)");
  for (std::size_t n = 1; n <= 7; ++n) {
    std::size_t count = 0;
    enumerate_ordered_partitions(n).for_each([&](const OrderedPartition&) { ++count; });
    o.require(BigInt(count) == fubini(n), "enumeration count n=" + std::to_string(n));
  }
  return o;
}

Outcome normalization() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t n = 1; n <= 5; ++n) {
      auto g = testutil::random_group(rng, n, 3);
      auto w = testutil::random_vector(rng, 3, 1.5);
      for (auto model : {PotentialModel::fd, PotentialModel::general}) {
        double s = 0.0;
        for (const auto& [part, p] : exact_model_distribution(g, w, model)) s += p;
        worst = std::max(worst, std::abs(s - 1.0));
      }
    }
  }
  o.require(worst <= 1e-9, "max |sum-1| = " + fmt("%.3g", worst));
  o.note("max |sum-1| = " + fmt("%.2g", worst));
  return o;
}

Outcome constant() {
  Outcome o;
  const auto [num, den] = constant_c_exact(2);
  o.require(num == 3 && den == 2, "C(2) != 3/2");
  double worst = 0.0;
  for (std::size_t n = 1; n <= 20; ++n) {
    const auto [p, q] = constant_c_exact(n);
    const double exact = std::log(p.convert_to<double>() / q.convert_to<double>());
    worst = std::max(worst, std::abs(constant_c(n) - exact));
  }
  o.require(worst <= 1e-12, "log form error " + fmt("%.3g", worst));
  o.note("max log error " + fmt("%.2g", worst));
  return o;
}

Outcome gradients() {
  Outcome o;
  using Fn = std::function<double(std::span<const double>)>;
  struct Case {
    std::string name;
    std::size_t extra;
    std::function<std::pair<double, std::vector<double>>(const QueryGroup&, std::span<const double>)> eval;
  };
  auto tie = [](std::span<const double> p, bool rk) {
    TieParams t;
    (rk ? t.alpha : t.beta) = p.back();
    return t;
  };
  const std::vector<Case> cases = {
      {"fd_gradient", 0,
       [](const QueryGroup& g, std::span<const double> w) {
         const auto part = partition_by_labels(g);
         return std::pair{fd_loglik(g, part, w), fd_gradient(g, part, w)};
       }},
      {"exact_general_gradient", 0,
       [](const QueryGroup& g, std::span<const double> w) {
         const auto part = partition_by_labels(g);
         return std::pair{exact_general_loglik(g, part, w), exact_general_gradient(g, part, w)};
       }},
      {"listmle", 0,
       [](const QueryGroup& g, std::span<const double> w) {
         auto r = listmle(g, w);
         return std::pair{r.value, r.gradient};
       }},
      {"logistic", 0,
       [](const QueryGroup& g, std::span<const double> w) {
         auto r = pairwise_loss(g, w, PairwiseKind::logistic);
         return std::pair{r.value, r.gradient};
       }},
      {"hinge", 0,
       [](const QueryGroup& g, std::span<const double> w) {
         auto r = pairwise_loss(g, w, PairwiseKind::hinge);
         return std::pair{r.value, r.gradient};
       }},
      {"quadratic", 0,
       [](const QueryGroup& g, std::span<const double> w) {
         auto r = pairwise_loss(g, w, PairwiseKind::quadratic);
         return std::pair{r.value, r.gradient};
       }},
      {"rao_kupper", 1,
       [&](const QueryGroup& g, std::span<const double> p) {
         auto r = rao_kupper_loglik(g, p.first(p.size() - 1), tie(p, true));
         return std::pair{r.value, r.gradient};
       }},
      {"davidson", 1,
       [&](const QueryGroup& g, std::span<const double> p) {
         auto r = davidson_loglik(g, p.first(p.size() - 1), tie(p, false));
         return std::pair{r.value, r.gradient};
       }},
  };
  std::string summary;
  for (const auto& c : cases) {
    std::mt19937_64 rng(std::hash<std::string>{}(c.name) & 0xffff);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const std::size_t n = 2 + static_cast<std::size_t>(t % 7);
      const std::size_t f = 1 + static_cast<std::size_t>(t % 5);
      const auto g = testutil::random_group(rng, n, f, 3);
      const auto p = testutil::random_vector(rng, f + c.extra);
      const Fn value = [&](std::span<const double> v) { return c.eval(g, v).first; };
      const auto numeric = testutil::numeric_gradient(value, p, 1e-5);
      worst = std::max(worst, testutil::max_rel_error(c.eval(g, p).second, numeric));
    }
    o.require(worst < 1e-6, c.name + " rel err " + fmt("%.3g", worst));
    summary += (summary.empty() ? "" : " ") + c.name + "=" + fmt("%.1g", worst);
  }
  o.note(summary);
  return o;
}

double time_gradient(const QueryGroup& g, const OrderedPartition& part, std::span<const double> w) {
  std::vector<double> grad(w.size());
  // enough inner repetitions for ~2 ms per sample, best of 15 samples
  const std::size_t inner = std::max<std::size_t>(1, 4'000'000 / g.size() / w.size());
  double best = 1e300;
  volatile double sink = 0.0;
  for (int rep = 0; rep < 15; ++rep) {
    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < inner; ++i) sink = sink + fd_value_and_gradient(g, part, w, grad);
    const double dt = std::chrono::duration<double>(Clock::now() - t0).count() / static_cast<double>(inner);
    best = std::min(best, dt);
  }
  return best;
}

Outcome dp_equivalence() {
  Outcome o;
  std::mt19937_64 rng(55);
  double worst = 0.0;
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(t) * 49 / 39;
    auto g = testutil::random_group(rng, n, 4, 4, 1.5);
    auto w = testutil::random_vector(rng, 4);
    const auto part = partition_by_labels(g);
    worst = std::max(worst, std::abs(fd_loglik(g, part, w) - fd_loglik_naive(g, part, w)));
    const auto a = fd_gradient(g, part, w);
    const auto b = fd_gradient_naive(g, part, w);
    for (std::size_t f = 0; f < 4; ++f) worst = std::max(worst, std::abs(a[f] - b[f]));
  }
  o.require(worst <= 1e-10, "DP vs naive " + fmt("%.3g", worst));

  std::vector<double> times;
  const std::vector<std::size_t> sizes{1000, 2000, 4000, 8000};
  for (std::size_t n : sizes) {
    auto g = testutil::random_group(rng, n, 10, 4);
    auto w = testutil::random_vector(rng, 10, 0.3);
    times.push_back(time_gradient(g, partition_by_labels(g), w));
  }
  std::string ratios;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double r = times[i] / times[i - 1];
    o.require(r <= 2.3, "doubling ratio " + fmt("%.2f", r));
    ratios += (ratios.empty() ? "" : ",") + fmt("%.2f", r);
  }
  o.note("max DP/naive diff " + fmt("%.1g", worst) + ", doubling ratios " + ratios);
  return o;
}

Outcome reductions() {
  Outcome o;
  std::mt19937_64 rng(66);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    auto g = testutil::random_group(rng, 2 + t % 10, 3);
    for (std::size_t i = 0; i < g.size(); ++i) g.labels[i] = static_cast<int>(i);
    auto w = testutil::random_vector(rng, 3);
    worst = std::max(worst, std::abs(fd_loglik(g, partition_by_labels(g), w) - listmle(g, w).value));
  }
  o.require(worst <= 1e-10, "FD vs ListMLE " + fmt("%.3g", worst));

  double bt = 0.0;
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    const double fi = normal(rng), fj = normal(rng);
    const double ref = bradley_terry_win(fi, fj);
    const auto rk = rao_kupper_probabilities(fi, fj, -30.0);
    const auto d = davidson_probabilities(fi, fj, -30.0);
    for (double diff : {rk.win - ref, rk.lose - (1 - ref), rk.tie, d.win - ref, d.lose - (1 - ref), d.tie})
      bt = std::max(bt, std::abs(diff));
  }
  o.require(bt <= 1e-9, "tie models vs Bradley-Terry " + fmt("%.3g", bt));
  o.note("FD-ListMLE " + fmt("%.1g", worst) + ", BT limit " + fmt("%.1g", bt));
  return o;
}

Outcome tie_completeness() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 3.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const double fi = normal(rng), fj = normal(rng), a = normal(rng), b = normal(rng);
    const auto rk = rao_kupper_probabilities(fi, fj, a);
    const auto d = davidson_probabilities(fi, fj, b);
    worst = std::max({worst, std::abs(rk.win + rk.lose + rk.tie - 1), std::abs(d.win + d.lose + d.tie - 1)});
  }
  o.require(worst <= 1e-12, "mass error " + fmt("%.3g", worst));
  o.note("max mass error " + fmt("%.1g", worst));
  return o;
}

double chain_tv(const std::vector<double>& scores, Sampler sampler, MhAcceptance acc, std::uint64_t seed) {
  const std::vector<std::size_t> rem{0, 1, 2};
  const auto exact = exact_stage_distribution(rem, scores);
  ChainState state(rem, std::vector<std::size_t>{0}, Rng(seed));
  CdConfig cfg;
  cfg.sampler = sampler;
  cfg.mh_acceptance = acc;
  constexpr std::size_t sweeps = 100000;
  std::vector<double> hist(7, 0.0);
  for (std::size_t s = 0; s < sweeps; ++s) {
    advance(state, scores, cfg);
    hist[state.mask() - 1] += 1.0;
  }
  double tv = 0.0;
  for (std::uint32_t m = 1; m <= 7; ++m) tv += std::abs(hist[m - 1] / sweeps - exact(m));
  return 0.5 * tv;
}

Outcome samplers() {
  Outcome o;
  const std::vector<std::vector<double>> settings{{0.8, -0.4, 0.1}, {2.0, 0.0, -1.5}, {0.0, 0.0, 0.0}};
  double gibbs = 0.0, mh_verbatim = 0.0, mh_corrected = 0.0;
  std::uint64_t seed = 100;
  for (const auto& s : settings) {
    gibbs = std::max(gibbs, chain_tv(s, Sampler::gibbs, MhAcceptance::verbatim, ++seed));
    mh_verbatim = std::max(mh_verbatim, chain_tv(s, Sampler::mh, MhAcceptance::verbatim, ++seed));
    mh_corrected = std::max(mh_corrected, chain_tv(s, Sampler::mh, MhAcceptance::corrected, ++seed));
  }
  o.require(gibbs < 0.02, "Gibbs TV " + fmt("%.4f", gibbs));
  o.require(mh_corrected < 0.02, "corrected MH TV " + fmt("%.4f", mh_corrected));

  // CD expectation against the exact gradient on a 3-document toy query
  QueryGroup g{"toy", {{0.5, 1.0}, {-0.3, 0.2}, {0.2, -0.7}}, {1, 0, 0}};
  const std::vector<double> w{1.0, 0.4};
  const auto part = partition_by_labels(g);
  const auto exact = exact_general_gradient(g, part, w);
  double worst_z = 0.0;
  for (Sampler sampler : {Sampler::gibbs, Sampler::mh}) {
    CdConfig cfg;
    cfg.sampler = sampler;
    cfg.mh_acceptance = MhAcceptance::corrected;
    cfg.mcmc_steps = 50;
    constexpr std::size_t reps = 10000;
    std::vector<double> mean(2, 0.0), sq(2, 0.0);
    for (std::size_t r = 0; r < reps; ++r) {
      const auto est = cd_gradient_estimate(g, part, w, cfg, 2024, r);
      for (std::size_t f = 0; f < 2; ++f) mean[f] += est[f], sq[f] += est[f] * est[f];
    }
    for (std::size_t f = 0; f < 2; ++f) {
      mean[f] /= reps;
      const double se = std::sqrt((sq[f] / reps - mean[f] * mean[f]) / reps);
      const double z = std::abs(mean[f] - exact[f]) / se;
      worst_z = std::max(worst_z, z);
    }
  }
  o.require(worst_z <= 3.0, "CD expectation off by " + fmt("%.2f", worst_z) + " SE");
  o.note("TV gibbs=" + fmt("%.4f", gibbs) + " mh-verbatim=" + fmt("%.4f", mh_verbatim) +
         " mh-corrected=" + fmt("%.4f", mh_corrected) + ", CD max |z|=" + fmt("%.2f", worst_z));
  return o;
}

Outcome metrics() {
  Outcome o;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> grade(0, 4);
  for (int t = 0; t < 100; ++t) {
    RankedList l;
    for (int i = 0; i < 1 + t % 20; ++i) l.labels.push_back(grade(rng));
    std::sort(l.labels.begin(), l.labels.end(), std::greater<>{});
    l.order.resize(l.labels.size());
    for (std::size_t T : {1u, 5u, 10u}) o.require(ndcg_at(l, T) == 1.0, "ideal NDCG != 1");
  }
  o.require(err(RankedList{{0}, {4}}) == 15.0 / 16.0, "ERR single grade-4");

  const auto ds = parse_letor_file(PMOP_FIXTURE_DIR "/three_queries.letor");
  const std::vector<std::size_t> Ts{1, 5};
  const auto r = evaluate(ds, std::vector<double>{1.0, 0.0}, Ts);
  const double q1 = 15.0 / 16 + 0.5 * (1.0 / 16) * (15.0 / 16);
  const double q2 = (3.0 / 16) / 2 + (13.0 / 16) * (1.0 / 16) / 3;
  const double q3 = 1.0 / 16;
  const double l3 = std::log2(3.0);
  const double n5 = (1.0 + (3 / l3 + 0.5) / (3 + 1 / l3) + 1.0) / 3;
  o.require(std::abs(r.mean_err - (q1 + q2 + q3) / 3) <= 1e-9, "fixture ERR");
  o.require(std::abs(r.mean_ndcg.at(1) - 2.0 / 3.0) <= 1e-9, "fixture NDCG@1");
  o.require(std::abs(r.mean_ndcg.at(5) - n5) <= 1e-9, "fixture NDCG@5");
  return o;
}

Outcome synthetic_recovery() {
  Outcome o;
  SyntheticSpec spec;  // 200 queries, 20 documents, 10 features
  const auto [all, planted] = make_synthetic(spec);
  const auto [raw_train, raw_test] = split_queries(all, 0.9, 7);
  const auto pipeline = fit_normalizer(raw_train);
  const auto train = apply_normalizer(pipeline, raw_train);
  const auto test = apply_normalizer(pipeline, raw_test);
  const std::vector<std::size_t> Ts{5};

  std::mt19937_64 rng(123);
  double random_ndcg = 0.0;
  constexpr int draws = 50;
  for (int d = 0; d < draws; ++d)
    random_ndcg += evaluate(test, testutil::random_vector(rng, spec.features), Ts).mean_ndcg.at(5);
  random_ndcg /= draws;

  std::string summary = "random=" + fmt("%.3f", random_ndcg);
  for (std::string_view name : kLossNames) {
    TrainReport report;
    if (is_stochastic_loss(name)) {
      auto cfg = TrainConfig::sgd_defaults();
      cfg.seed = 11;
      CdConfig cd;
      cd.sampler = name == "pmop-mh" ? Sampler::mh : Sampler::gibbs;
      report = train_stochastic(train, CdGradient(cd, cfg.seed), cfg);
    } else {
      const auto loss = make_loss(name);
      report = train_batch(train, *loss, TrainConfig::lbfgs_defaults());
      if (name == "pmop-fd") {
        bool monotone = true;
        for (std::size_t i = 1; i < report.objective_trace.size(); ++i)
          monotone = monotone && report.objective_trace[i] >= report.objective_trace[i - 1];
        o.require(monotone, "pmop-fd trace not monotone");
      }
    }
    const double ndcg = evaluate(test, report.weights(), Ts).mean_ndcg.at(5);
    o.require(ndcg - random_ndcg >= 0.15, std::string(name) + " NDCG@5 " + fmt("%.3f", ndcg));
    summary += " " + std::string(name) + "=" + fmt("%.3f", ndcg);
  }
  o.note(summary);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;  // 0: none
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "combinatorics", 10, combinatorics},
      {2, "normalization", 30, normalization},
      {3, "constant C", 0, constant},
      {4, "gradient suite", 0, gradients},
      {5, "DP equivalence and linear scaling", 0, dp_equivalence},
      {6, "reductions", 0, reductions},
      {7, "tie-model completeness", 0, tie_completeness},
      {8, "sampler correctness", 0, samplers},
      {9, "metrics", 0, metrics},
      {10, "end-to-end synthetic recovery", 300, synthetic_recovery},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (c.budget_seconds > 0) o.require(secs < c.budget_seconds, "over time budget");
    if (!o.pass) ++failed;
    std::printf("%s  %2d  %-36s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
