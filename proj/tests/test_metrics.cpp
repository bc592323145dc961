#include <gtest/gtest.h>

#include <random>

#include "cotprobe/metrics.hpp"
#include "oracles.hpp"

using namespace cotprobe;

namespace {

ScoredSet worked() { return {{0.9, 0.8, 0.3, 0.1}, {true, true, false, false}}; }

ScoredSet random_set(std::mt19937_64& gen, bool force_ties) {
  std::uniform_int_distribution<std::size_t> size(2, 64);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScoredSet s;
  const std::size_t n = size(gen);
  for (std::size_t i = 0; i < n; ++i) {
    double x = u(gen);
    if (force_ties) x = std::round(x * 10.0) / 10.0;  // lands on bin edges too
    s.scores.push_back(x);
    s.labels.push_back(gen() % 2 == 0);
  }
  s.labels[0] = true;
  s.labels[1] = false;
  return s;
}

}  // namespace

TEST(RocAuc, WorkedExamples) {
  EXPECT_DOUBLE_EQ(roc_auc({{0.9, 0.6, 0.4, 0.2}, {true, false, true, false}}), 0.75);
  EXPECT_DOUBLE_EQ(roc_auc({{0.9, 0.8, 0.2, 0.1}, {true, true, false, false}}), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc({{0.4, 0.4, 0.4}, {true, false, true}}), 0.5);
  try {
    roc_auc({{0.1, 0.2}, {true, true}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateLabels);
  }
}

TEST(Ece, WorkedExamples) {
  EXPECT_NEAR(ece(worked()), 0.175, 1e-15);
  EXPECT_NEAR(ece({{0.7}, {true}}), 0.3, 1e-15);
  EXPECT_NEAR(ece({{0.5, 0.5}, {true, false}}), 0.0, 1e-15);
  EXPECT_THROW(ece({}), Error);
}

TEST(Ece, BinEdges) {
  EXPECT_EQ(bin_index(0.0, 10), 0u);
  EXPECT_EQ(bin_index(0.1, 10), 1u);
  EXPECT_EQ(bin_index(0.3, 10), 3u);
  EXPECT_EQ(bin_index(0.7, 10), 7u);
  EXPECT_EQ(bin_index(1.0, 10), 9u);
  EXPECT_EQ(bin_index(0.999999, 10), 9u);
  for (int b = 0; b <= 10; ++b) {
    const double x = b / 10.0;
    const std::size_t idx = bin_index(x, 10);
    EXPECT_GE(x, idx / 10.0);
    if (idx < 9) {
      EXPECT_LT(x, (idx + 1) / 10.0);
    }
  }
}

TEST(Brier, WorkedExamples) {
  EXPECT_NEAR(brier(worked()), 0.0375, 1e-15);
  EXPECT_EQ(brier({{1.0, 0.0}, {true, false}}), 0.0);
  EXPECT_DOUBLE_EQ(brier({{0.5, 0.5, 0.5}, {true, false, false}}), 0.25);
}

TEST(Metrics, MatchOraclesOnRandomSets) {
  std::mt19937_64 gen(17);
  for (int t = 0; t < 200; ++t) {
    const auto s = random_set(gen, t % 2 == 1);
    EXPECT_NEAR(roc_auc(s), oracle::pairwise_auc(s.scores, s.labels), 1e-12);
    EXPECT_NEAR(ece(s), oracle::naive_ece(s.scores, s.labels, 10), 1e-12);
    EXPECT_NEAR(ece(s, 7), oracle::naive_ece(s.scores, s.labels, 7), 1e-12);
    EXPECT_NEAR(brier(s), oracle::naive_brier(s.scores, s.labels), 1e-12);
  }
}

TEST(Metrics, Properties) {
  std::mt19937_64 gen(23);
  for (int t = 0; t < 100; ++t) {
    auto s = random_set(gen, t % 3 == 0);
    ScoredSet flipped = s;
    flipped.labels.flip();
    EXPECT_NEAR(roc_auc(s) + roc_auc(flipped), 1.0, 1e-12);

    ScoredSet squashed = s;
    for (auto& x : squashed.scores) x = x * x * x;
    EXPECT_NEAR(roc_auc(squashed), roc_auc(s), 1e-12);

    ScoredSet shuffled = s;
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), gen);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      shuffled.scores[i] = s.scores[idx[i]];
      shuffled.labels[i] = s.labels[idx[i]];
    }
    EXPECT_NEAR(ece(shuffled), ece(s), 1e-12);
    EXPECT_NEAR(brier(shuffled), brier(s), 1e-12);
    EXPECT_GE(ece(s), 0.0);
    EXPECT_LE(ece(s), 1.0);
    EXPECT_EQ(confusion_metrics(s, 0.0).recall, 1.0);

    const auto table = reliability_table(s);
    std::size_t total = 0;
    for (const auto& b : table) total += b.count;
    EXPECT_EQ(total, s.size());
  }
}

TEST(Confusion, WorkedExamples) {
  const auto a = confusion_metrics({{0.9, 0.2}, {true, false}});
  EXPECT_EQ(a.accuracy, 1.0);
  EXPECT_EQ(a.macro_f1, 1.0);
  const auto b = confusion_metrics({{0.9, 0.9}, {true, false}});
  EXPECT_EQ(b.accuracy, 0.5);
  EXPECT_EQ(b.precision, 0.5);
  EXPECT_EQ(b.recall, 1.0);
  const auto c = confusion_metrics({{0.1, 0.2, 0.3}, {true, false, false}});
  EXPECT_EQ(c.tp + c.fp, 0u);
  EXPECT_EQ(c.precision, 0.0);
  EXPECT_EQ(c.recall, 0.0);
  EXPECT_DOUBLE_EQ(c.macro_f1, 0.5 * (0.0 + 0.8));
  EXPECT_EQ(confusion_metrics({{0.5}, {false}}, 0.5).fp, 1u);  // threshold is inclusive
}

TEST(Lookahead, Buckets) {
  std::vector<std::size_t> got;
  for (double f : {0.25, 0.5, 0.75, 1.0}) got.push_back(fraction_bucket(f, 10));
  EXPECT_EQ(got, (std::vector<std::size_t>{3, 5, 8, 10}));
  EXPECT_EQ(fraction_bucket(0.1, 10), 1u);
  EXPECT_EQ(fraction_bucket(0.3, 10), 3u);
  EXPECT_EQ(fraction_bucket(0.7, 10), 7u);
  EXPECT_EQ(fraction_bucket(1.0 / 3.0, 3), 1u);
  EXPECT_EQ(fraction_bucket(2.0 / 3.0, 3), 2u);
}

TEST(Lookahead, CurveOmitsEmptyBucketsAndSingleClassAuc) {
  const std::vector<double> fractions{0.25, 0.5, 0.75, 1.0, 1.0, 1.0};
  const ScoredSet set{{0.6, 0.6, 0.4, 0.9, 0.2, 0.7}, {true, true, false, true, false, false}};
  const auto curve = lookahead_curve(fractions, set, 10);
  ASSERT_EQ(curve.size(), 4u);
  EXPECT_EQ(curve[0].bucket, 3u);
  EXPECT_FALSE(curve[0].roc_auc.has_value());
  EXPECT_EQ(curve[3].bucket, 10u);
  EXPECT_EQ(curve[3].count, 3u);
  EXPECT_DOUBLE_EQ(*curve[3].roc_auc, 1.0);
  const auto all_last = lookahead_curve(std::vector<double>(3, 1.0), {{0.1, 0.2, 0.3}, {true, false, true}}, 10);
  ASSERT_EQ(all_last.size(), 1u);
  EXPECT_EQ(all_last[0].bucket, 10u);
}

TEST(Report, JsonAndCsv) {
  const auto report = evaluate(worked());
  const auto j = to_json(report);
  EXPECT_DOUBLE_EQ(j["roc_auc"].get<double>(), 1.0);
  EXPECT_NEAR(j["ece"].get<double>(), 0.175, 1e-15);
  EXPECT_EQ(j["reliability"].size(), 10u);
  const auto csv = reliability_csv(report.reliability);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lower,upper,count,mean_confidence,empirical_accuracy");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
}
