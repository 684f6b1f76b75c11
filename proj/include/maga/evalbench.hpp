#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maga/corpus.hpp"

namespace maga {

struct ScoredExample {
  double score = 0.0;
  int label = kHumanLabel;
};

struct ScoredSet {
  std::string detector_id;
  std::string dataset_id;
  std::vector<ScoredExample> examples;

  std::vector<double> human_scores() const;
  std::vector<double> machine_scores() const;
};

/// P(machine score > human score) with ties counted 1/2, computed from
/// midranks in O(n log n).
double auc(std::span<const double> machine_scores,
           std::span<const double> human_scores);
double auc(const ScoredSet& scored);

struct Confusion {
  double acc = 0.0;
  double tpr = 0.0;  // machine recall
  double tnr = 0.0;  // human recall
};

/// Predicts machine iff score >= threshold.
Confusion confusion(const ScoredSet& scored, double threshold);

/// Smallest candidate threshold t (a human score, or the next double above
/// the maximum) such that at most floor(target_fpr * N) human scores are >= t.
double threshold_at_fpr(std::span<const double> human_scores,
                        double target_fpr);

/// Accuracy at the in-sample FPR-pinned threshold.
double acc_at_fpr(const ScoredSet& scored, double target_fpr);
/// Split-fitting variant: threshold fitted on `fit_human_scores`.
double acc_at_fpr(const ScoredSet& scored, double target_fpr,
                  std::span<const double> fit_human_scores);

inline constexpr double kBinocularsThreshold = 0.9015310749276843;
inline constexpr double kTargetFpr = 0.05;

class ThresholdRegistry {
 public:
  /// 0.5 for the probability-style detectors and the Binoculars constant.
  static ThresholdRegistry defaults();
  static ThresholdRegistry parse_csv(std::string_view content);

  void set(std::string detector_id, double threshold);
  std::optional<double> find(std::string_view detector_id) const;
  std::string to_csv() const;  // header `detector,threshold`
  const std::map<std::string, double, std::less<>>& entries() const {
    return thresholds_;
  }

 private:
  std::map<std::string, double, std::less<>> thresholds_;
};

/// Metrics as percentages rounded half-up to 2 decimals. Empty optionals
/// are blank cells.
struct BenchRow {
  std::string detector;
  std::string dataset;
  std::optional<double> acc;
  std::optional<double> tpr;
  std::optional<double> tnr;
  double auc = 0.0;
  double acc_at_fpr5 = 0.0;
  std::optional<double> delta_acc;
  std::optional<double> delta_tpr;
  std::optional<double> delta_auc;
  std::optional<double> delta_acc_at_fpr5;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  const BenchRow& row(std::string_view detector, std::string_view dataset) const;
  /// Header `detector,dataset,acc,tpr,tnr,auc,acc_at_fpr5,delta_acc,
  /// delta_tpr,delta_auc,delta_acc_at_fpr5`.
  std::string to_csv() const;
  static BenchReport parse_csv(std::string_view content);
};

inline constexpr std::string_view kAverageDetector = "avg";

struct BenchOptions {
  std::optional<std::string> baseline_dataset;
  double target_fpr = kTargetFpr;
  bool average_rows = true;
};

/// One row per (detector, dataset) in input order, plus an "avg" row per
/// dataset. Detectors without a registered threshold get blank ACC cells.
BenchReport bench(const std::vector<ScoredSet>& scored,
                  const ThresholdRegistry& registry,
                  const BenchOptions& options = {});

/// Recomputes the delta columns of an ingested report against `baseline`.
void apply_deltas(BenchReport& report, std::string_view baseline_dataset);

struct NamedScorer {
  std::string id;
  std::function<double(std::string_view)> score;
};

struct NamedDataset {
  std::string id;
  std::vector<DocumentRecord> records;
};

/// Scores every record of every dataset with every detector, then benches.
BenchReport bench(const std::vector<NamedScorer>& scorers,
                  const std::vector<NamedDataset>& datasets,
                  const ThresholdRegistry& registry,
                  const BenchOptions& options = {});

}  // namespace maga
