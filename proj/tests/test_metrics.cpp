#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pmop/dataio.hpp"
#include "pmop/metrics.hpp"
#include "test_util.hpp"

using namespace pmop;

namespace {

RankedList list_of(std::vector<int> labels) {
  RankedList l;
  for (std::size_t i = 0; i < labels.size(); ++i) l.order.push_back(i);
  l.labels = std::move(labels);
  return l;
}

}  // namespace

TEST(Ndcg, IdealOrderIsOne) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> grade(0, 4);
  for (int t = 0; t < 50; ++t) {
    std::vector<int> labels(1 + t % 12);
    for (int& l : labels) l = grade(rng);
    std::sort(labels.begin(), labels.end(), std::greater<>{});
    for (std::size_t T : {1u, 3u, 5u, 10u, 100u}) EXPECT_EQ(ndcg_at(list_of(labels), T), 1.0);
  }
}

TEST(Ndcg, AllZeroLabelsIsOne) { EXPECT_EQ(ndcg_at(list_of({0, 0, 0}), 2), 1.0); }

TEST(Ndcg, WorstTopDocument) { EXPECT_EQ(ndcg_at(list_of({0, 4}), 1), 0.0); }

TEST(Ndcg, HandEvaluated) {
  // labels [1, 3]: DCG@2 = 1 + 7/log2(3); ideal = 7 + 1/log2(3)
  const double l3 = std::log2(3.0);
  EXPECT_NEAR(ndcg_at(list_of({1, 3}), 2), (1 + 7 / l3) / (7 + 1 / l3), 1e-15);
  EXPECT_THROW(ndcg_at(list_of({1}), 0), std::invalid_argument);
}

TEST(Err, Examples) {
  EXPECT_EQ(err(list_of({4})), 15.0 / 16.0);
  EXPECT_EQ(err(list_of({0, 0, 0})), 0.0);
  EXPECT_NEAR(err(list_of({4, 4})), 15.0 / 16 + 0.5 * (15.0 / 16) * (1.0 / 16), 1e-15);
}

TEST(Err, WiderGradeScale) {
  EXPECT_NEAR(err(list_of({6}), 6), 63.0 / 64.0, 1e-15);
}

TEST(Metrics, BoundedInUnitInterval) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> grade(0, 4);
  for (int t = 0; t < 200; ++t) {
    std::vector<int> labels(1 + t % 15);
    for (int& l : labels) l = grade(rng);
    const auto l = list_of(labels);
    for (double v : {err(l), ndcg_at(l, 1), ndcg_at(l, 5)}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Err, PromotingHigherGradeNeverHurts) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> grade(0, 4);
  for (int t = 0; t < 500; ++t) {
    std::vector<int> labels(8);
    for (int& l : labels) l = grade(rng);
    std::uniform_int_distribution<std::size_t> pos(0, 7);
    std::size_t i = pos(rng), j = pos(rng);
    if (i > j) std::swap(i, j);
    if (labels[j] <= labels[i]) continue;
    auto swapped = labels;
    std::swap(swapped[i], swapped[j]);
    EXPECT_GE(err(list_of(swapped)), err(list_of(labels)) - 1e-15);
  }
}

TEST(RankByScores, StableDescending) {
  EXPECT_EQ(rank_by_scores(std::vector<double>{1, 3, 3, 0}), (std::vector<std::size_t>{1, 2, 0, 3}));
  EXPECT_EQ(rank_by_scores(std::vector<double>{0, 0, 0}), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Evaluate, HandComputedFixture) {
  const auto ds = parse_letor_file(PMOP_FIXTURE_DIR "/three_queries.letor");
  const std::vector<double> w{1.0, 0.0};
  const std::vector<std::size_t> Ts{1, 5};
  const auto r = evaluate(ds, w, Ts);
  // predicted label orders: [4,4], [0,2,1], [1]
  const double q1 = 15.0 / 16 + 0.5 * (1.0 / 16) * (15.0 / 16);
  const double q2 = 0.0 + (3.0 / 16) / 2 + (13.0 / 16) * (1.0 / 16) / 3;
  const double q3 = 1.0 / 16;
  EXPECT_EQ(r.query_count, 3u);
  EXPECT_NEAR(r.mean_err, (q1 + q2 + q3) / 3, 1e-9);
  const double l3 = std::log2(3.0), l4 = 2.0;
  const double n2 = (3 / l3 + 1 / l4) / (3 + 1 / l3);
  EXPECT_NEAR(r.mean_ndcg.at(1), (1.0 + 0.0 + 1.0) / 3, 1e-9);
  EXPECT_NEAR(r.mean_ndcg.at(5), (1.0 + n2 + 1.0) / 3, 1e-9);
}

TEST(Evaluate, PerfectWeightsGiveOne) {
  Dataset ds{1, {{"a", {{3}, {2}, {1}}, {2, 1, 0}}, {"b", {{5}, {-1}}, {1, 0}}}};
  const std::vector<std::size_t> Ts{1, 2, 5};
  const auto r = evaluate(ds, std::vector<double>{1.0}, Ts);
  for (const auto& [T, v] : r.mean_ndcg) EXPECT_EQ(v, 1.0);
}

TEST(Evaluate, ZeroWeightsKeepFileOrder) {
  Dataset ds{1, {{"a", {{3}, {2}, {1}}, {0, 1, 2}}}};
  const std::vector<std::size_t> Ts{1};
  const auto r = evaluate(ds, std::vector<double>{0.0}, Ts);
  EXPECT_EQ(r.mean_ndcg.at(1), 0.0);
  EXPECT_EQ(evaluate(ds, std::vector<double>{0.0}, Ts).mean_err, r.mean_err);
}

TEST(Evaluate, EmptyDatasetThrows) {
  const std::vector<std::size_t> Ts{1};
  EXPECT_THROW(evaluate(Dataset{}, std::vector<double>{}, Ts), std::invalid_argument);
}

TEST(EvalReport, KeyValueFormat) {
  EvalReport r;
  r.query_count = 2;
  r.mean_err = 0.5;
  r.mean_ndcg[5] = 0.25;
  EXPECT_EQ(r.to_key_values(), "queries=2\nerr=0.5\nndcg@5=0.25\n");
}

TEST(GradeCeiling, AtLeastFour) {
  Dataset ds{1, {{"a", {{0}}, {2}}}};
  EXPECT_EQ(grade_ceiling(ds), 4);
  ds.groups[0].labels[0] = 6;
  EXPECT_EQ(grade_ceiling(ds), 6);
}
