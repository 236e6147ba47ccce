#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "monostage/errors.hpp"
#include "monostage/metrics.hpp"

namespace monostage {
namespace {

TEST(Evaluate, AllCorrect) {
  const std::vector<LabelSequence> gold{{1, 1, 2}, {1, 3, 3}};
  const auto r = evaluate(gold, gold);
  EXPECT_EQ(r.global, 1.0);
  EXPECT_EQ(r.mean_per_stage, 1.0);
  for (const auto& [s, acc] : r.per_stage) EXPECT_EQ(acc, 1.0);
  EXPECT_EQ(r.per_stage.size(), 3u);
}

TEST(Evaluate, HandEnumerated) {
  const auto r = evaluate({{1, 1, 2, 2}}, {{1, 1, 1, 2}});
  EXPECT_DOUBLE_EQ(r.global, 0.75);
  EXPECT_DOUBLE_EQ(r.per_stage.at(1), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.per_stage.at(2), 1.0);
  EXPECT_NEAR(r.mean_per_stage, 0.8333333333, 1e-9);
  EXPECT_EQ(r.counts.at(1), 3u);
}

TEST(Evaluate, AbsentStagesAreOmitted) {
  const auto r = evaluate({{1, 1, 5, 5}}, {{1, 1, 4, 4}});
  EXPECT_EQ(r.per_stage.count(5), 0u);
  EXPECT_EQ(r.per_stage.size(), 2u);
  EXPECT_DOUBLE_EQ(r.mean_per_stage, 0.5);
}

TEST(Evaluate, LengthMismatchNamesVideo) {
  try {
    evaluate({{1, 1}}, {{1, 1, 1}}, {"clip_a"});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("clip_a"), std::string::npos);
  }
}

TEST(Evaluate, ById) {
  Dataset gold{{"a", Matrix(2, 1), {1, 2}}, {"b", Matrix(2, 1), {1, 1}}};
  const std::vector<Prediction> preds{{"b", {1, 2}}, {"a", {1, 2}}};
  const auto r = evaluate(preds, gold);
  EXPECT_DOUBLE_EQ(r.global, 0.75);
  EXPECT_THROW(evaluate(std::vector<Prediction>{{"a", {1, 2}}}, gold), DataError);
  EXPECT_THROW(evaluate(std::vector<Prediction>{{"a", {1, 2}}, {"b", {1, 1}}, {"c", {1}}}, gold), DataError);
}

TEST(Evaluate, ReferencePerStageRowMean) {
  // Stage accuracies of a reference per-stage row, realized as 1000 gold
  // frames per stage.
  const int correct[8] = {999, 999, 949, 999, 351, 846, 714, 290};
  LabelSequence gold, pred;
  for (int s = 1; s <= 8; ++s) {
    for (int k = 0; k < 1000; ++k) {
      gold.push_back(s);
      pred.push_back(k < correct[s - 1] ? s : (s % 8) + 1);
    }
  }
  const auto r = evaluate({pred}, {gold});
  EXPECT_NEAR(100.0 * r.mean_per_stage, 76.8, 0.05);
}

TEST(Evaluate, GlobalIsCountWeightedMeanAndOrderFree) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> label(1, 6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<LabelSequence> gold, pred;
    for (int v = 0; v < 5; ++v) {
      LabelSequence g(20), p(20);
      for (int t = 0; t < 20; ++t) {
        g[t] = label(rng);
        p[t] = label(rng);
      }
      std::sort(g.begin(), g.end());
      gold.push_back(g);
      pred.push_back(p);
    }
    const auto r = evaluate(pred, gold);
    std::size_t hits = 0;
    for (const auto& [s, n] : r.counts) hits += r.correct.at(s);
    EXPECT_EQ(static_cast<double>(hits) / static_cast<double>(r.frames), r.global);
    double weighted = 0.0;
    for (const auto& [s, acc] : r.per_stage) weighted += acc * static_cast<double>(r.counts.at(s));
    EXPECT_NEAR(weighted / static_cast<double>(r.frames), r.global, 1e-12);

    std::reverse(gold.begin(), gold.end());
    std::reverse(pred.begin(), pred.end());
    const auto flipped = evaluate(pred, gold);
    EXPECT_EQ(flipped.global, r.global);
    EXPECT_EQ(flipped.per_stage, r.per_stage);
    EXPECT_EQ(flipped.mean_per_stage, r.mean_per_stage);
  }
}

TEST(Evaluate, DuplicatingCorrectStageNeverLowersMean) {
  const std::vector<LabelSequence> gold{{1, 1, 2, 2, 3}};
  const std::vector<LabelSequence> pred{{1, 2, 2, 2, 1}};
  const auto base = evaluate(pred, gold);
  const auto dup = evaluate({{1, 2, 2, 2, 2, 2, 1}}, {{1, 1, 2, 2, 2, 2, 3}});
  EXPECT_GE(dup.mean_per_stage, base.mean_per_stage);
}

TEST(AggregateSeeds, Examples) {
  EvalReport a;
  a.global = 0.8;
  a.mean_per_stage = 0.6;
  a.per_stage = {{1, 0.9}};
  EvalReport b = a;
  b.global = 0.9;
  const auto agg = aggregate_seeds({a, b});
  EXPECT_DOUBLE_EQ(agg.global.mean, 0.85);
  EXPECT_NEAR(agg.global.stddev, 0.07071067811865474, 1e-12);
  EXPECT_EQ(agg.mean_per_stage.stddev, 0.0);

  const auto single = aggregate_seeds({a});
  EXPECT_EQ(single.global.mean, 0.8);
  EXPECT_EQ(single.global.stddev, 0.0);
  EXPECT_EQ(aggregate_seeds({a, a, a}).global.stddev, 0.0);
}

TEST(FormatTable, Columns) {
  const auto r = evaluate({{1, 1, 2, 2}}, {{1, 1, 1, 2}});
  const std::string table = format_table({{"Ours", r}}, 3);
  const std::string first_line = table.substr(0, table.find('\n'));
  EXPECT_NE(first_line.find("Global"), std::string::npos);
  EXPECT_LT(first_line.find("Global"), first_line.find("Per-Stage"));
  EXPECT_NE(table.find("75.0"), std::string::npos);
  EXPECT_NE(table.find("83.3"), std::string::npos);
  EXPECT_NE(table.find(" -"), std::string::npos);

  const auto agg = aggregate_seeds({r, r});
  EXPECT_NE(format_aggregate_table({{"Ours", agg}}, 2).find("75.0±0.0"), std::string::npos);
}

}  // namespace
}  // namespace monostage
