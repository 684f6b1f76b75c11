// Command-line front end: generate, train-detector, rldf, bench, stats.
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "maga/arena.hpp"
#include "maga/corpus.hpp"
#include "maga/detector.hpp"
#include "maga/error.hpp"
#include "maga/evalbench.hpp"
#include "maga/pipeline.hpp"
#include "maga/rldf.hpp"
#include "maga/sampler.hpp"
#include "maga/text_io.hpp"
#include "maga/textstats.hpp"

namespace fs = std::filesystem;
using namespace maga;

namespace {

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": malformed JSON: " + e.what());
  }
}

std::vector<LabeledFeatures> labeled(const PairedCorpus& corpus,
                                     const FeatureSpec& spec) {
  std::vector<LabeledFeatures> out;
  for (const auto& p : corpus.pairs) {
    out.push_back({featurize(p.human.text, spec), kHumanLabel});
    for (const auto& m : p.machines) {
      out.push_back({featurize(m.text, spec), kMachineLabel});
    }
  }
  return out;
}

struct GenerateArgs {
  std::string titles, variant, stages, policies, presets, out;
  std::uint64_t seed = 0;
  std::size_t max_length = 12;
};

int run_generate(const GenerateArgs& a) {
  VariantSpec spec;
  spec.variant_id = a.variant;
  spec.seed = a.seed;
  spec.max_length = a.max_length;
  if (!a.stages.empty()) spec.stages = stages_from_json(read_json(a.stages));
  spec.presets = a.presets.empty() ? default_presets() : load_presets_csv(a.presets);

  std::vector<DocumentRecord> humans;
  for (auto& r : read_jsonl(a.titles)) {
    if (r.is_human()) humans.push_back(std::move(r));
  }
  const auto registry = PolicyRegistry::load(a.policies);
  const auto records = build_variant(humans, registry, spec);

  fs::path out = a.out;
  if (fs::is_directory(out) || a.out.ends_with('/')) {
    out /= a.variant + ".jsonl";
  }
  write_jsonl(out, records);
  std::cout << "wrote " << records.size() << " records to " << out.string() << "\n";
  return 0;
}

struct TrainArgs {
  std::string corpus, features, hyper, out;
};

int run_train(const TrainArgs& a) {
  FeatureSpec spec;
  if (!a.features.empty()) spec = feature_spec_from_json(read_json(a.features));
  TrainHyper hyper;
  if (!a.hyper.empty()) hyper = train_hyper_from_json(read_json(a.hyper));
  const auto corpus = pair_by_title(read_jsonl(a.corpus));
  auto result = train(DetectorParams::zeros(spec.dimension), corpus, spec, hyper);
  const auto examples = labeled(corpus, spec);
  save_checkpoint(a.out, DetectorCheckpoint{spec, result.params});
  nlohmann::json summary = {
      {"examples", examples.size()},
      {"train_accuracy", accuracy(result.params, examples)},
      {"final_loss", result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()}};
  std::cout << summary.dump() << "\n";
  return 0;
}

struct RldfArgs {
  std::string config, mode, out;
  int rounds = 3;
};

int run_rldf(const RldfArgs& a) {
  nlohmann::json cfg = a.config.empty() ? nlohmann::json::object() : read_json(a.config);
  const ArenaSpec arena_spec =
      arena_spec_from_json(cfg.value("arena", nlohmann::json::object()));
  RldfConfig config = rldf_config_from_json(cfg.value("rldf", nlohmann::json::object()));
  if (!a.mode.empty()) config.mode = parse_cross_mode(a.mode);
  config.max_length = arena_spec.max_length;

  const Arena arena = make_arena(arena_spec);
  const fs::path out = a.out;
  write_jsonl(out / "humans.jsonl", arena.world.human_records);
  // policies/ holds round 0 as the base set and round_<k>/ per later round,
  // the layout `generate --policies` reads.
  const fs::path policies = out / "policies";
  for (const auto& [id, params] : arena.policies) {
    save_policy(policies / (id + ".json"), arena.policy_file(id));
  }

  RoundState state;
  state.policies = arena.policies;
  const auto result = run_adversarial(state, arena.world, config, a.rounds);
  for (std::size_t r = 0; r < result.policies_per_round.size(); ++r) {
    for (const auto& [id, params] : result.policies_per_round[r]) {
      PolicyFile f = arena.policy_file(id);
      f.params = params;
      save_policy(policies / ("round_" + std::to_string(r + 1)) / (id + ".json"), f);
    }
  }
  write_file(out / "history.csv", history_csv(result.history));
  nlohmann::json resolved = {{"arena", arena_spec_to_json(arena_spec)},
                             {"rldf", rldf_config_to_json(config)},
                             {"rounds", a.rounds}};
  if (result.converged_round) resolved["converged_round"] = *result.converged_round;
  write_file(out / "run.json", resolved.dump(2) + "\n");
  std::cout << history_csv(result.history);
  return 0;
}

struct BenchArgs {
  std::vector<std::string> datasets, detectors;
  std::string baseline, thresholds, out;
  double target_fpr = kTargetFpr;
};

int run_bench(const BenchArgs& a) {
  std::vector<NamedScorer> scorers;
  for (const auto& path : a.detectors) {
    const auto ckpt = load_checkpoint(path);
    scorers.push_back({fs::path(path).stem().string(),
                       [ckpt](std::string_view text) {
                         return score(ckpt.params, featurize(text, ckpt.spec));
                       }});
  }
  std::vector<NamedDataset> datasets;
  for (const auto& path : a.datasets) {
    datasets.push_back({fs::path(path).stem().string(), read_jsonl(path)});
  }
  const ThresholdRegistry registry = a.thresholds.empty()
                                         ? ThresholdRegistry::defaults()
                                         : ThresholdRegistry::parse_csv(read_file(a.thresholds));
  BenchOptions options;
  options.target_fpr = a.target_fpr;
  if (!a.baseline.empty()) options.baseline_dataset = a.baseline;
  const auto report = bench(scorers, datasets, registry, options);
  write_file(a.out, report.to_csv());
  std::cout << report.to_csv();
  return 0;
}

struct StatsArgs {
  std::string corpus, reference, out, scoring_policy, ppl_out, easy_words;
  std::vector<int> orders{1, 2, 3, 4};
};

int run_stats(const StatsArgs& a) {
  const auto corpus = read_jsonl(a.corpus);
  std::map<std::string, std::string> reference_text;
  for (const auto& r : read_jsonl(a.reference)) {
    if (r.is_human()) reference_text.emplace(r.title, r.text);
  }
  const EasyWordList easy =
      a.easy_words.empty() ? EasyWordList::bundled() : EasyWordList::load(a.easy_words);

  std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>>
      groups;  // variant -> (documents, aligned references)
  const std::string stem = fs::path(a.corpus).stem().string();
  for (const auto& r : corpus) {
    auto ref = reference_text.find(r.title);
    if (ref == reference_text.end()) {
      throw ValidationError("no reference text for title: " + r.title);
    }
    auto& g = groups[stem + (r.is_human() ? "/human" : "/machine")];
    g.first.push_back(r.text);
    g.second.push_back(ref->second);
  }

  std::optional<PolicyFile> scorer;
  if (!a.scoring_policy.empty()) scorer = load_policy(a.scoring_policy);

  std::string csv = "variant,metric,value\n";
  std::vector<std::pair<std::string, LogPplSummary>> ppl;
  for (const auto& [variant, docs] : groups) {
    auto profile = corpus_stat_profile(docs.first, docs.second, a.orders, easy);
    if (scorer) {
      auto summary = log_ppl_profile(docs.first, scorer->vocabulary, scorer->params);
      profile.mean_log_ppl = summary.mean;
      ppl.emplace_back(variant, std::move(summary));
    }
    csv += stat_profile_csv_rows(variant, profile);
  }
  write_file(a.out, csv);
  if (!a.ppl_out.empty()) write_file(a.ppl_out, log_ppl_csv(ppl));
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial co-training arena for machine-text detection"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Build a dataset variant from titles and policies");
  g->add_option("--titles", gen.titles, "JSONL with the human records")->required();
  g->add_option("--variant", gen.variant, "Variant id")->required();
  g->add_option("--stages", gen.stages, "JSON stage list");
  g->add_option("--policies", gen.policies, "Policy directory")->required();
  g->add_option("--presets", gen.presets, "Decoding preset CSV");
  g->add_option("--seed", gen.seed, "Run seed");
  g->add_option("--max-length", gen.max_length, "Maximum generated tokens");
  g->add_option("--out", gen.out, "Output JSONL (or directory)")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train-detector", "Train a hashed n-gram detector");
  t->add_option("--corpus", tr.corpus, "Paired JSONL corpus")->required();
  t->add_option("--features", tr.features, "Feature spec JSON");
  t->add_option("--hyper", tr.hyper, "Training hyperparameter JSON");
  t->add_option("--out", tr.out, "Checkpoint path")->required();

  RldfArgs rl;
  auto* r = app.add_subcommand("rldf", "Run adversarial rounds on the toy arena");
  r->add_option("--config", rl.config, "Config JSON with 'arena' and 'rldf' objects");
  r->add_option("--rounds", rl.rounds, "Number of rounds")->check(CLI::PositiveNumber);
  r->add_option("--mode", rl.mode, "plain|cd|cm|cmd")
      ->check(CLI::IsMember({"plain", "cd", "cm", "cmd"}));
  r->add_option("--out", rl.out, "Output directory")->required();

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Score datasets with detectors and tabulate");
  b->add_option("--datasets", be.datasets, "Dataset JSONL files")->required();
  b->add_option("--baseline", be.baseline, "Baseline dataset id for deltas");
  b->add_option("--detectors", be.detectors, "Detector checkpoints")->required();
  b->add_option("--thresholds", be.thresholds, "Threshold registry CSV");
  b->add_option("--target-fpr", be.target_fpr, "FPR ceiling for ACC@FPR");
  b->add_option("--out", be.out, "Report CSV")->required();

  StatsArgs st;
  auto* s = app.add_subcommand("stats", "Text statistics against a reference corpus");
  s->add_option("--corpus", st.corpus, "Corpus JSONL")->required();
  s->add_option("--reference", st.reference, "Reference JSONL (human records)")->required();
  s->add_option("--scoring-policy", st.scoring_policy, "Policy JSON for log-PPL");
  s->add_option("--ppl-out", st.ppl_out, "log-PPL summary CSV");
  s->add_option("--easy-words", st.easy_words, "Dale-Chall easy-word list");
  s->add_option("--orders", st.orders, "n-gram orders for overlap");
  s->add_option("--out", st.out, "Stats CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*g) return run_generate(gen);
    if (*t) return run_train(tr);
    if (*r) return run_rldf(rl);
    if (*b) return run_bench(be);
    if (*s) return run_stats(st);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
