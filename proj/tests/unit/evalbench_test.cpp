#include <gtest/gtest.h>

#include <cmath>

#include "maga/error.hpp"
#include "maga/evalbench.hpp"
#include "maga/rng.hpp"
#include "oracles.hpp"

using namespace maga;

namespace {

ScoredSet make_set(const std::vector<double>& machine,
                   const std::vector<double>& human,
                   std::string detector = "d", std::string dataset = "x") {
  ScoredSet s;
  s.detector_id = std::move(detector);
  s.dataset_id = std::move(dataset);
  for (double m : machine) s.examples.push_back({m, kMachineLabel});
  for (double h : human) s.examples.push_back({h, kHumanLabel});
  return s;
}

// 100 machine and 100 human scores with exactly `wins` machine>human pairs.
ScoredSet pair_count_fixture(int wins, std::string detector,
                             std::string dataset) {
  std::vector<double> human, machine;
  for (int j = 0; j < 100; ++j) human.push_back((j + 0.5) / 100.0);
  const int base = wins / 100;
  const int extra = wins % 100;
  for (int i = 0; i < 100; ++i) {
    machine.push_back((base + (i < extra ? 1 : 0)) / 100.0);
  }
  return make_set(machine, human, std::move(detector), std::move(dataset));
}

}  // namespace

TEST(Auc, HandValues) {
  EXPECT_EQ(auc(make_set({0.9, 0.8}, {0.1, 0.2})), 1.0);
  EXPECT_EQ(auc(make_set({0.5, 0.5}, {0.5, 0.5, 0.5})), 0.5);
  EXPECT_EQ(auc(make_set({0.8, 0.4}, {0.6, 0.2})), 0.75);
  EXPECT_THROW(auc(make_set({0.3}, {})), ValidationError);
  EXPECT_THROW(auc(make_set({NAN}, {0.1})), ValidationError);
}

TEST(Auc, MatchesPairwiseOracleWithTies) {
  CounterRng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t nm = 1 + rng.below(60);
    const std::size_t nh = 1 + rng.below(60);
    const std::size_t levels = 1 + rng.below(12);
    std::vector<double> m(nm), h(nh);
    for (auto& x : m) x = static_cast<double>(rng.below(levels)) / levels;
    for (auto& x : h) x = static_cast<double>(rng.below(levels)) / levels;
    EXPECT_EQ(auc(m, h), oracle::pairwise_auc(m, h));
  }
}

TEST(Confusion, HandValues) {
  const auto c = confusion(make_set({0.8, 0.4}, {0.6, 0.2}), 0.5);
  EXPECT_EQ(c.acc, 0.5);
  EXPECT_EQ(c.tpr, 0.5);
  EXPECT_EQ(c.tnr, 0.5);
  const auto perfect = confusion(make_set({0.9, 0.8}, {0.1, 0.2}), 0.5);
  EXPECT_EQ(perfect.acc, 1.0);
  const auto high = confusion(make_set({0.9, 0.8}, {0.1, 0.2}), 2.0);
  EXPECT_EQ(high.tpr, 0.0);
  EXPECT_EQ(high.tnr, 1.0);
}

TEST(ThresholdAtFpr, HandValues) {
  std::vector<double> h;
  for (int i = 1; i <= 20; ++i) h.push_back(i / 100.0);
  EXPECT_EQ(threshold_at_fpr(h, 0.05), 0.20);
  EXPECT_GT(threshold_at_fpr(h, 0.0), 0.20);
  EXPECT_EQ(oracle::realized_fpr(h, threshold_at_fpr(h, 0.0)), 0.0);

  // Two duplicates at the maximum with one allowed positive: both excluded.
  std::vector<double> dup{0.9, 0.9};
  for (int i = 0; i < 18; ++i) dup.push_back(0.1);
  const double t = threshold_at_fpr(dup, 0.05);
  EXPECT_GT(t, 0.9);
  EXPECT_EQ(oracle::realized_fpr(dup, t), 0.0);

  EXPECT_THROW(threshold_at_fpr(std::vector<double>{}, 0.05), ValidationError);
  EXPECT_THROW(threshold_at_fpr(h, 1.0), ValidationError);
}

TEST(ThresholdAtFpr, CeilingAndMinimalityAgainstScan) {
  CounterRng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(120);
    std::vector<double> h(n);
    for (auto& x : h) x = static_cast<double>(rng.below(40)) / 40.0;
    const double target = 0.01 * static_cast<double>(rng.below(30));
    const double t = threshold_at_fpr(h, target);
    EXPECT_LE(oracle::realized_fpr(h, t), target + 1e-12);
    EXPECT_EQ(t, oracle::brute_threshold(h, target));
  }
}

TEST(AccAtFpr, HandValues) {
  std::vector<double> h, m;
  for (int i = 1; i <= 20; ++i) {
    h.push_back(0.5 + i / 100.0);
    m.push_back(i / 100.0);
  }
  // Machines all below humans: TPR 0, one allowed false positive.
  EXPECT_DOUBLE_EQ(acc_at_fpr(make_set(m, h), 0.05), 19.0 / 40.0);
  // Perfect separation still spends the one allowed false positive, since
  // the pinned threshold is the largest human score.
  EXPECT_DOUBLE_EQ(acc_at_fpr(make_set(h, m), 0.05), 39.0 / 40.0);
  EXPECT_EQ(acc_at_fpr(make_set(h, m), 0.0), 1.0);
  // Split fitting uses only the supplied humans.
  const std::vector<double> fit{0.0};
  EXPECT_EQ(acc_at_fpr(make_set(m, h), 0.05, fit), 0.5);
}

TEST(ThresholdRegistry, DefaultsAndCsv) {
  const auto r = ThresholdRegistry::defaults();
  EXPECT_EQ(*r.find("RADAR"), 0.5);
  EXPECT_EQ(*r.find("Binoculars"), 0.9015310749276843);
  EXPECT_FALSE(r.find("GLTR").has_value());
  const auto back = ThresholdRegistry::parse_csv(r.to_csv());
  EXPECT_EQ(back.entries(), r.entries());
  EXPECT_THROW(ThresholdRegistry::parse_csv("id,t\n"), ValidationError);
  EXPECT_THROW(ThresholdRegistry::parse_csv("detector,threshold\nx,-1\n"),
               ValidationError);
}

TEST(Bench, DeltaArithmeticAndBlankCells) {
  std::vector<ScoredSet> sets{pair_count_fixture(7140, "RADAR", "MGB"),
                              pair_count_fixture(7140, "GLTR", "MGB"),
                              pair_count_fixture(6327, "RADAR", "MAGA"),
                              pair_count_fixture(6327, "GLTR", "MAGA")};
  BenchOptions opts;
  opts.baseline_dataset = "MGB";
  const auto report = bench(sets, ThresholdRegistry::defaults(), opts);
  const auto& radar = report.row("RADAR", "MAGA");
  EXPECT_EQ(report.row("RADAR", "MGB").auc, 71.40);
  EXPECT_EQ(radar.auc, 63.27);
  ASSERT_TRUE(radar.delta_auc.has_value());
  EXPECT_EQ(*radar.delta_auc, -8.13);
  const auto& gltr = report.row("GLTR", "MAGA");
  EXPECT_FALSE(gltr.acc.has_value());
  EXPECT_FALSE(gltr.delta_acc.has_value());
  EXPECT_EQ(*gltr.delta_auc, -8.13);
  EXPECT_FALSE(report.row("RADAR", "MGB").delta_auc.has_value());
  EXPECT_EQ(report.row(kAverageDetector, "MAGA").auc, 63.27);

  const auto csv = report.to_csv();
  EXPECT_NE(csv.find("GLTR,MAGA,,,,63.27,"), std::string::npos);
  auto ingested = BenchReport::parse_csv(csv);
  EXPECT_EQ(ingested.to_csv(), csv);
  apply_deltas(ingested, "MGB");
  EXPECT_EQ(ingested.to_csv(), csv);
  EXPECT_THROW(apply_deltas(ingested, "nope"), ValidationError);
}

TEST(Bench, IngestedReportRow) {
  const std::string csv =
      "detector,dataset,acc,tpr,tnr,auc,acc_at_fpr5,delta_acc,delta_tpr,"
      "delta_auc,delta_acc_at_fpr5\n"
      "R-B GPT2,MGB,,,,71.40,59.94,,,,\n"
      "R-B GPT2,MAGA,,,,63.27,50.00,,,,\n";
  auto report = BenchReport::parse_csv(csv);
  apply_deltas(report, "MGB");
  EXPECT_EQ(*report.row("R-B GPT2", "MAGA").delta_auc, -8.13);
  EXPECT_EQ(*report.row("R-B GPT2", "MAGA").delta_acc_at_fpr5, -9.94);
}

TEST(Bench, ScorersOverDatasets) {
  std::vector<NamedDataset> data(1);
  data[0].id = "toy";
  for (int i = 0; i < 4; ++i) {
    DocumentRecord r;
    r.text = i % 2 ? "machine" : "human";
    r.label = i % 2 ? kMachineLabel : kHumanLabel;
    data[0].records.push_back(r);
  }
  std::vector<NamedScorer> scorers{
      {"RADAR", [](std::string_view t) { return t == "machine" ? 0.9 : 0.1; }}};
  const auto report = bench(scorers, data, ThresholdRegistry::defaults());
  EXPECT_EQ(report.row("RADAR", "toy").auc, 100.0);
  EXPECT_EQ(*report.row("RADAR", "toy").acc, 100.0);
}
