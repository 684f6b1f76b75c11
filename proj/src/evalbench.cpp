#include "maga/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "maga/error.hpp"
#include "maga/text_io.hpp"

namespace maga {
namespace {

double percent(double fraction) { return round_half_up(100.0 * fraction, 2); }

std::optional<double> delta(const std::optional<double>& variant,
                            const std::optional<double>& baseline) {
  if (!variant || !baseline) return std::nullopt;
  return round_half_up(*variant - *baseline, 2);
}

std::string cell(const std::optional<double>& v) {
  return v ? format_fixed(*v, 2) : std::string();
}

std::optional<double> parse_cell(const std::string& s) {
  if (trim(s).empty()) return std::nullopt;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ValidationError("bench cell is not a number: " + s);
  }
}

}  // namespace

std::vector<double> ScoredSet::human_scores() const {
  std::vector<double> out;
  for (const auto& e : examples) {
    if (e.label == kHumanLabel) out.push_back(e.score);
  }
  return out;
}

std::vector<double> ScoredSet::machine_scores() const {
  std::vector<double> out;
  for (const auto& e : examples) {
    if (e.label == kMachineLabel) out.push_back(e.score);
  }
  return out;
}

double auc(std::span<const double> machine_scores,
           std::span<const double> human_scores) {
  if (machine_scores.empty() || human_scores.empty()) {
    throw ValidationError("AUC needs at least one example of each class");
  }
  struct Item {
    double score;
    bool machine;
  };
  std::vector<Item> items;
  items.reserve(machine_scores.size() + human_scores.size());
  for (double s : machine_scores) {
    if (!std::isfinite(s)) throw ValidationError("non-finite score");
    items.push_back({s, true});
  }
  for (double s : human_scores) {
    if (!std::isfinite(s)) throw ValidationError("non-finite score");
    items.push_back({s, false});
  }
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });

  // Twice the machine rank sum, with tied blocks given their midrank, keeps
  // everything integral until the final division.
  double twice_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    std::size_t machines = 0;
    while (j < items.size() && items[j].score == items[i].score) {
      machines += items[j].machine;
      ++j;
    }
    // ranks i+1 .. j, midrank (i + 1 + j) / 2
    twice_rank_sum += static_cast<double>(machines) *
                      static_cast<double>(i + 1 + j);
    i = j;
  }
  const double nm = static_cast<double>(machine_scores.size());
  const double nh = static_cast<double>(human_scores.size());
  const double twice_u = twice_rank_sum - nm * (nm + 1.0);
  return (twice_u / 2.0) / (nm * nh);
}

double auc(const ScoredSet& scored) {
  return auc(scored.machine_scores(), scored.human_scores());
}

Confusion confusion(const ScoredSet& scored, double threshold) {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (const auto& e : scored.examples) {
    const bool predicted_machine = e.score >= threshold;
    if (e.label == kMachineLabel) {
      (predicted_machine ? tp : fn)++;
    } else {
      (predicted_machine ? fp : tn)++;
    }
  }
  Confusion c;
  const auto total = tp + fn + tn + fp;
  if (total > 0) {
    c.acc = static_cast<double>(tp + tn) / static_cast<double>(total);
  }
  if (tp + fn > 0) c.tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (tn + fp > 0) c.tnr = static_cast<double>(tn) / static_cast<double>(tn + fp);
  return c;
}

double threshold_at_fpr(std::span<const double> human_scores,
                        double target_fpr) {
  if (human_scores.empty()) {
    throw ValidationError("threshold_at_fpr needs human scores");
  }
  if (!(target_fpr >= 0.0 && target_fpr < 1.0)) {
    throw ValidationError("target_fpr must be in [0, 1)");
  }
  std::vector<double> desc(human_scores.begin(), human_scores.end());
  std::sort(desc.begin(), desc.end(), std::greater<>());
  const auto n = desc.size();
  // 1e-9 absorbs representation error such as 0.29 * 100 = 28.999...
  const auto allowed = static_cast<std::size_t>(
      std::floor(target_fpr * static_cast<double>(n) + 1e-9));

  double threshold =
      std::nextafter(desc.front(), std::numeric_limits<double>::infinity());
  // Walk candidate values downwards while at most `allowed` scores are >= t.
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && desc[j] == desc[i]) ++j;
    if (j > allowed) break;  // j scores are >= desc[i]
    threshold = desc[i];
    i = j;
  }
  return threshold;
}

double acc_at_fpr(const ScoredSet& scored, double target_fpr) {
  const auto humans = scored.human_scores();
  return acc_at_fpr(scored, target_fpr, humans);
}

double acc_at_fpr(const ScoredSet& scored, double target_fpr,
                  std::span<const double> fit_human_scores) {
  if (scored.machine_scores().empty() || scored.human_scores().empty()) {
    throw ValidationError("ACC@FPR needs both classes");
  }
  return confusion(scored, threshold_at_fpr(fit_human_scores, target_fpr)).acc;
}

// ---------------------------------------------------------------------------
// Threshold registry

ThresholdRegistry ThresholdRegistry::defaults() {
  ThresholdRegistry r;
  for (const char* id : {"R-B GPT2", "R-L GPT2", "R-B CGPT", "RADAR", "SCRN",
                         "DETree", "F-DetectGPT", "LLMDet", "DALD", "GECScore"}) {
    r.set(id, 0.5);
  }
  r.set("Binoculars", kBinocularsThreshold);
  return r;
}

ThresholdRegistry ThresholdRegistry::parse_csv(std::string_view content) {
  const auto rows = maga::parse_csv(content);
  if (rows.empty() ||
      rows.front() != std::vector<std::string>{"detector", "threshold"}) {
    throw ValidationError("threshold file header must be detector,threshold");
  }
  ThresholdRegistry r;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) {
      throw ValidationError("threshold row " + std::to_string(i) +
                            " must have 2 columns");
    }
    double t = 0.0;
    try {
      t = std::stod(rows[i][1]);
    } catch (const std::exception&) {
      throw ValidationError("threshold is not a number: " + rows[i][1]);
    }
    r.set(rows[i][0], t);
  }
  return r;
}

void ThresholdRegistry::set(std::string detector_id, double threshold) {
  if (!(threshold >= 0.0) || !std::isfinite(threshold)) {
    throw ValidationError("threshold must be finite and >= 0");
  }
  thresholds_[std::move(detector_id)] = threshold;
}

std::optional<double> ThresholdRegistry::find(
    std::string_view detector_id) const {
  auto it = thresholds_.find(detector_id);
  if (it == thresholds_.end()) return std::nullopt;
  return it->second;
}

std::string ThresholdRegistry::to_csv() const {
  std::string out = "detector,threshold\n";
  for (const auto& [id, t] : thresholds_) {
    out += csv_escape(id) + "," + format_double(t) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bench report

const BenchRow& BenchReport::row(std::string_view detector,
                                 std::string_view dataset) const {
  for (const auto& r : rows) {
    if (r.detector == detector && r.dataset == dataset) return r;
  }
  throw ValidationError("no bench row for " + std::string(detector) + " / " +
                        std::string(dataset));
}

std::string BenchReport::to_csv() const {
  std::string out =
      "detector,dataset,acc,tpr,tnr,auc,acc_at_fpr5,delta_acc,delta_tpr,"
      "delta_auc,delta_acc_at_fpr5\n";
  for (const auto& r : rows) {
    out += csv_escape(r.detector) + "," + csv_escape(r.dataset) + "," +
           cell(r.acc) + "," + cell(r.tpr) + "," + cell(r.tnr) + "," +
           format_fixed(r.auc, 2) + "," + format_fixed(r.acc_at_fpr5, 2) + "," +
           cell(r.delta_acc) + "," + cell(r.delta_tpr) + "," +
           cell(r.delta_auc) + "," + cell(r.delta_acc_at_fpr5) + "\n";
  }
  return out;
}

BenchReport BenchReport::parse_csv(std::string_view content) {
  const auto rows = maga::parse_csv(content);
  const std::vector<std::string> header{
      "detector", "dataset",     "acc",       "tpr",       "tnr",
      "auc",      "acc_at_fpr5", "delta_acc", "delta_tpr", "delta_auc",
      "delta_acc_at_fpr5"};
  if (rows.empty() || rows.front() != header) {
    throw ValidationError("bench report header mismatch");
  }
  BenchReport report;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& c = rows[i];
    if (c.size() != header.size()) {
      throw ValidationError("bench row " + std::to_string(i) +
                            " has wrong column count");
    }
    BenchRow r;
    r.detector = c[0];
    r.dataset = c[1];
    r.acc = parse_cell(c[2]);
    r.tpr = parse_cell(c[3]);
    r.tnr = parse_cell(c[4]);
    auto a = parse_cell(c[5]);
    auto f = parse_cell(c[6]);
    if (!a || !f) throw ValidationError("auc and acc_at_fpr5 are required");
    r.auc = *a;
    r.acc_at_fpr5 = *f;
    r.delta_acc = parse_cell(c[7]);
    r.delta_tpr = parse_cell(c[8]);
    r.delta_auc = parse_cell(c[9]);
    r.delta_acc_at_fpr5 = parse_cell(c[10]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

void apply_deltas(BenchReport& report, std::string_view baseline_dataset) {
  std::map<std::string, const BenchRow*, std::less<>> base;
  for (const auto& r : report.rows) {
    if (r.dataset == baseline_dataset) base[r.detector] = &r;
  }
  if (base.empty()) {
    throw ValidationError("baseline dataset not present: " +
                          std::string(baseline_dataset));
  }
  std::vector<BenchRow> updated = report.rows;
  for (auto& r : updated) {
    r.delta_acc = r.delta_tpr = r.delta_auc = r.delta_acc_at_fpr5 =
        std::nullopt;
    if (r.dataset == baseline_dataset) continue;
    auto it = base.find(r.detector);
    if (it == base.end()) continue;
    const BenchRow& b = *it->second;
    r.delta_acc = delta(r.acc, b.acc);
    r.delta_tpr = delta(r.tpr, b.tpr);
    r.delta_auc = delta(r.auc, b.auc);
    r.delta_acc_at_fpr5 = delta(r.acc_at_fpr5, b.acc_at_fpr5);
  }
  report.rows = std::move(updated);
}

BenchReport bench(const std::vector<ScoredSet>& scored,
                  const ThresholdRegistry& registry,
                  const BenchOptions& options) {
  BenchReport report;
  struct Sums {
    double auc = 0, fpr = 0, acc = 0, tpr = 0, tnr = 0;
    std::size_t n = 0, n_acc = 0;
  };
  std::vector<std::string> dataset_order;
  std::map<std::string, Sums> sums;
  for (const auto& s : scored) {
    BenchRow row;
    row.detector = s.detector_id;
    row.dataset = s.dataset_id;
    const double a = auc(s);
    const double f = acc_at_fpr(s, options.target_fpr);
    row.auc = percent(a);
    row.acc_at_fpr5 = percent(f);
    if (!sums.count(s.dataset_id)) dataset_order.push_back(s.dataset_id);
    Sums& agg = sums[s.dataset_id];
    agg.auc += a;
    agg.fpr += f;
    ++agg.n;
    if (auto t = registry.find(s.detector_id)) {
      const Confusion c = confusion(s, *t);
      row.acc = percent(c.acc);
      row.tpr = percent(c.tpr);
      row.tnr = percent(c.tnr);
      agg.acc += c.acc;
      agg.tpr += c.tpr;
      agg.tnr += c.tnr;
      ++agg.n_acc;
    }
    report.rows.push_back(std::move(row));
  }
  if (options.average_rows) {
    for (const auto& id : dataset_order) {
      const Sums& agg = sums[id];
      BenchRow row;
      row.detector = std::string(kAverageDetector);
      row.dataset = id;
      const double n = static_cast<double>(agg.n);
      row.auc = percent(agg.auc / n);
      row.acc_at_fpr5 = percent(agg.fpr / n);
      if (agg.n_acc > 0) {
        const double m = static_cast<double>(agg.n_acc);
        row.acc = percent(agg.acc / m);
        row.tpr = percent(agg.tpr / m);
        row.tnr = percent(agg.tnr / m);
      }
      report.rows.push_back(std::move(row));
    }
  }
  if (options.baseline_dataset) apply_deltas(report, *options.baseline_dataset);
  return report;
}

BenchReport bench(const std::vector<NamedScorer>& scorers,
                  const std::vector<NamedDataset>& datasets,
                  const ThresholdRegistry& registry,
                  const BenchOptions& options) {
  std::vector<ScoredSet> scored;
  for (const auto& d : datasets) {
    for (const auto& s : scorers) {
      ScoredSet set;
      set.detector_id = s.id;
      set.dataset_id = d.id;
      for (const auto& r : d.records) {
        set.examples.push_back({s.score(r.text), r.label});
      }
      scored.push_back(std::move(set));
    }
  }
  return bench(scored, registry, options);
}

}  // namespace maga
