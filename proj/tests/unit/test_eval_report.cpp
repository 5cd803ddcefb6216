#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "../common/metrics_oracle.hpp"
#include "hsd/csv.hpp"
#include "hsd/error.hpp"
#include "hsd/eval_report.hpp"
#include "support.hpp"

namespace hsd {
namespace {

const LabelScheme kScheme = LabelScheme::davidson();

TEST(Metrics, HandComputed) {
  const std::vector<std::size_t> golds = {0, 0, 1, 1, 2, 2};
  const std::vector<std::size_t> preds = {0, 1, 1, 1, 2, 0};
  const auto r = metrics(preds, golds, kScheme);
  ASSERT_EQ(r.per_class.size(), 3u);
  EXPECT_EQ(r.per_class[0].label, "hate");
  EXPECT_DOUBLE_EQ(r.per_class[0].precision, 0.5);
  EXPECT_DOUBLE_EQ(r.per_class[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(r.per_class[0].f1, 0.5);
  EXPECT_NEAR(r.per_class[1].precision, 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.per_class[1].recall, 1.0);
  EXPECT_NEAR(r.per_class[1].f1, 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(r.per_class[2].precision, 1.0);
  EXPECT_DOUBLE_EQ(r.per_class[2].recall, 0.5);
  EXPECT_NEAR(r.per_class[2].f1, 2.0 / 3.0, 1e-15);
  for (const auto& c : r.per_class) EXPECT_EQ(c.support, 2u);
  EXPECT_NEAR(r.weighted.precision, 0.7222222222222222, 1e-15);
  EXPECT_NEAR(r.weighted.recall, 0.6666666666666666, 1e-15);
  EXPECT_NEAR(r.weighted.f1, 0.6555555555555556, 1e-15);
  EXPECT_NEAR(r.accuracy, 4.0 / 6.0, 1e-15);
}

TEST(Metrics, PerfectPredictions) {
  const std::vector<std::size_t> golds = {2, 0, 1, 1, 2};
  const auto r = metrics(golds, golds, kScheme);
  for (const auto& c : r.per_class) {
    EXPECT_DOUBLE_EQ(c.precision, 1.0);
    EXPECT_DOUBLE_EQ(c.recall, 1.0);
    EXPECT_DOUBLE_EQ(c.f1, 1.0);
  }
  EXPECT_DOUBLE_EQ(r.weighted.f1, 1.0);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
}

TEST(Metrics, AbsentClassIsDegenerateZero) {
  const auto r = metrics({0, 0, 1}, {0, 1, 1}, kScheme);
  EXPECT_EQ(r.per_class[2].support, 0u);
  EXPECT_TRUE(r.per_class[2].degenerate);
  EXPECT_DOUBLE_EQ(r.per_class[2].f1, 0.0);
  EXPECT_FALSE(r.per_class[0].degenerate);
}

TEST(Metrics, Errors) {
  try {
    metrics({0, 1}, {0}, kScheme);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
  try {
    metrics({}, {}, kScheme);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
}

TEST(Metrics, JsonRoundTrip) {
  const auto r = metrics({0, 1, 1, 2, 0}, {0, 1, 2, 2, 1}, kScheme);
  EXPECT_EQ(MetricsReport::from_json(r.to_json()), r);
}

TEST(MetricsProperty, MatchesBruteForceOracle) {
  Rng rng(2024);
  std::vector<std::size_t> preds, golds;
  for (int trial = 0; trial < 500; ++trial) {
    oracle::random_instance(rng, 3, 60, preds, golds);
    const auto r = metrics(preds, golds, kScheme);
    const auto o = oracle::brute_force(preds, golds, 3);
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_NEAR(r.per_class[c].precision, o.per_class[c].precision, 1e-12);
      EXPECT_NEAR(r.per_class[c].recall, o.per_class[c].recall, 1e-12);
      EXPECT_NEAR(r.per_class[c].f1, o.per_class[c].f1, 1e-12);
      EXPECT_EQ(r.per_class[c].support, o.per_class[c].support);
    }
    EXPECT_NEAR(r.weighted.precision, o.precision, 1e-12);
    EXPECT_NEAR(r.weighted.recall, o.recall, 1e-12);
    EXPECT_NEAR(r.weighted.f1, o.f1, 1e-12);
    EXPECT_NEAR(r.accuracy, o.accuracy, 1e-12);
    for (double v : {r.weighted.precision, r.weighted.recall, r.weighted.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(MetricsProperty, PermutationInvariant) {
  Rng rng(77);
  std::vector<std::size_t> preds, golds;
  for (int trial = 0; trial < 100; ++trial) {
    oracle::random_instance(rng, 3, 40, preds, golds);
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> p2, g2;
    for (auto i : order) {
      p2.push_back(preds[i]);
      g2.push_back(golds[i]);
    }
    const auto a = metrics(preds, golds, kScheme);
    const auto b = metrics(p2, g2, kScheme);
    EXPECT_NEAR(a.weighted.f1, b.weighted.f1, 1e-12);
    EXPECT_EQ(confusion(preds, golds, kScheme).counts, confusion(p2, g2, kScheme).counts);
  }
}

TEST(Confusion, CountsAndPercentages) {
  const auto m = confusion({1, 0, 1}, {0, 0, 1}, kScheme);
  EXPECT_EQ(m.labels, kScheme.classes);
  const std::vector<std::vector<std::size_t>> expected = {{1, 1, 0}, {0, 1, 0}, {0, 0, 0}};
  EXPECT_EQ(m.counts, expected);
  EXPECT_EQ(m.total(), 3u);
  EXPECT_DOUBLE_EQ(m.row_percent[0][0], 50.0);
  EXPECT_DOUBLE_EQ(m.row_percent[0][1], 50.0);
  EXPECT_DOUBLE_EQ(m.row_percent[1][1], 100.0);
  for (double v : m.row_percent[2]) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(ConfusionProperty, RowsSumToSupport) {
  Rng rng(5);
  std::vector<std::size_t> preds, golds;
  for (int trial = 0; trial < 200; ++trial) {
    oracle::random_instance(rng, 3, 50, preds, golds);
    const auto m = confusion(preds, golds, kScheme);
    EXPECT_EQ(m.total(), golds.size());
    for (std::size_t g = 0; g < 3; ++g) {
      const auto row = std::accumulate(m.counts[g].begin(), m.counts[g].end(), std::size_t{0});
      EXPECT_EQ(row, static_cast<std::size_t>(std::count(golds.begin(), golds.end(), g)));
      const double pct = std::accumulate(m.row_percent[g].begin(), m.row_percent[g].end(), 0.0);
      EXPECT_NEAR(pct, row ? 100.0 : 0.0, 1e-9);
    }
  }
}

Corpus three_records() {
  return Corpus(kScheme, {{"a", "first text", "first text", 0, "t"},
                          {"b", "second | text", "second text", 1, "t"},
                          {"c", "third, text", "third text", 2, "t"}});
}

TEST(ErrorTable, NoErrors) {
  const auto corpus = three_records();
  const std::vector<std::vector<double>> probs = {
      {0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}};
  EXPECT_TRUE(error_table(corpus, {0, 1, 2}, probs, 20).empty());
}

TEST(ErrorTable, MostConfidentFirstAndLimited) {
  const auto corpus = three_records();
  const std::vector<std::vector<double>> probs = {
      {0.2, 0.6, 0.2}, {0.05, 0.05, 0.9}, {0.7, 0.2, 0.1}};
  const auto all = error_table(corpus, {1, 2, 0}, probs, 20);
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].id, "b");
  EXPECT_DOUBLE_EQ(all[0].confidence(), 0.9);
  EXPECT_EQ(all[1].id, "c");
  EXPECT_EQ(all[2].id, "a");
  const auto limited = error_table(corpus, {1, 2, 0}, probs, 2);
  ASSERT_EQ(limited.size(), 2u);
  EXPECT_EQ(limited[0].id, "b");
  EXPECT_EQ(limited[1].id, "c");
}

TEST(ErrorTable, LengthMismatch) {
  EXPECT_THROW(error_table(three_records(), {0, 1}, {{1, 0, 0}, {0, 1, 0}}, 5), Error);
}

TEST(RenderReport, WritesAllArtifacts) {
  const auto corpus = three_records();
  const std::vector<std::size_t> preds = {1, 2, 2};
  const std::vector<std::size_t> golds = {0, 1, 2};
  const std::vector<std::vector<double>> probs = {
      {0.2, 0.6, 0.2}, {0.05, 0.05, 0.9}, {0.1, 0.1, 0.8}};
  const auto report = metrics(preds, golds, kScheme);
  const auto errors = error_table(corpus, preds, probs, 20);
  testing::TempDir tmp;
  render_report(report, confusion(preds, golds, kScheme), errors, kScheme, tmp.path());
  for (const char* name : {"metrics.json", "confusion_counts.csv", "confusion_percent.csv",
                           "errors.csv", "errors.md", "confusion.svg"}) {
    EXPECT_TRUE(std::filesystem::exists(tmp / name)) << name;
  }
  const auto j = nlohmann::json::parse(testing::read_text(tmp / "metrics.json"));
  EXPECT_EQ(MetricsReport::from_json(j), report);

  const auto rows = csv::read_file(tmp / "errors.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].fields, (std::vector<std::string>{"id", "gold", "predicted", "p_predicted", "text"}));
  EXPECT_EQ(rows[1].fields[0], "b");
  EXPECT_EQ(rows[1].fields[4], "second | text");
  EXPECT_EQ(rows[2].fields[0], "a");

  const auto counts = testing::read_text(tmp / "confusion_counts.csv");
  EXPECT_NE(counts.find("hate,0,1,0"), std::string::npos) << counts;
  const auto md = testing::read_text(tmp / "errors.md");
  EXPECT_NE(md.find("second \\| text"), std::string::npos) << md;
}

TEST(RenderReport, NoMisclassificationsMessage) {
  testing::TempDir tmp;
  const std::vector<std::size_t> golds = {0, 1, 2};
  render_report(metrics(golds, golds, kScheme), confusion(golds, golds, kScheme), {}, kScheme,
                tmp.path());
  EXPECT_NE(testing::read_text(tmp / "errors.md").find("There are no misclassifications."),
            std::string::npos);
}

}  // namespace
}  // namespace hsd
