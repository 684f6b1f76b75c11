#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "maga/arena.hpp"
#include "maga/corpus.hpp"
#include "maga/detector.hpp"
#include "maga/error.hpp"
#include "maga/evalbench.hpp"
#include "maga/pipeline.hpp"
#include "maga/rldf.hpp"
#include "maga/sampler.hpp"
#include "maga/textstats.hpp"

namespace py = pybind11;
using namespace maga;

namespace {

ScoredSet scored_set(const std::vector<double>& machine,
                     const std::vector<double>& human) {
  ScoredSet s;
  for (double m : machine) s.examples.push_back({m, kMachineLabel});
  for (double h : human) s.examples.push_back({h, kHumanLabel});
  return s;
}

PolicyRegistry arena_registry(const Arena& arena) {
  PolicyRegistry reg;
  for (const auto& [id, p] : arena.policies) {
    reg.sets[std::string(PolicyRegistry::kBaseTag)].emplace(id, arena.policy_file(id));
  }
  return reg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "maga core: decoding, detectors, RLDF rounds, metrics and datasets";
  m.attr("__version__") = "0.1.0";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  // --- sampler
  py::class_<SamplerConfig>(m, "SamplerConfig")
      .def(py::init<>())
      .def_readwrite("temperature", &SamplerConfig::temperature)
      .def_readwrite("top_k", &SamplerConfig::top_k)
      .def_readwrite("top_p", &SamplerConfig::top_p)
      .def_readwrite("repetition_penalty", &SamplerConfig::repetition_penalty)
      .def_readwrite("presence_penalty", &SamplerConfig::presence_penalty)
      .def_readwrite("frequency_penalty", &SamplerConfig::frequency_penalty)
      .def_readwrite("max_length", &SamplerConfig::max_length)
      .def("validate", &SamplerConfig::validate);

  m.def(
      "decode_distribution",
      [](const std::vector<double>& logits, const std::vector<TokenId>& history,
         const SamplerConfig& config) {
        config.validate();
        return distribution(apply_penalties(logits, history, config), config);
      },
      py::arg("logits"), py::arg("history") = std::vector<TokenId>{},
      py::arg("config") = SamplerConfig{},
      "Next-token distribution after penalties, temperature, top-k and top-p.");
  m.def("softmax", [](const std::vector<double>& x) { return softmax(x); });
  m.def(
      "presets",
      [] {
        std::map<std::string, SamplerConfig> out;
        for (const auto& p : default_presets()) out.emplace(p.model, p.config);
        return out;
      },
      "Decoding presets of the reference generators.");

  // --- evalbench
  m.def("auc", [](const std::vector<double>& machine, const std::vector<double>& human) {
    return auc(machine, human);
  });
  m.def("threshold_at_fpr",
        [](const std::vector<double>& human, double target) {
          return threshold_at_fpr(human, target);
        },
        py::arg("human"), py::arg("target_fpr") = kTargetFpr);
  m.def(
      "confusion",
      [](const std::vector<double>& machine, const std::vector<double>& human,
         double threshold) {
        const auto c = confusion(scored_set(machine, human), threshold);
        return std::map<std::string, double>{{"acc", c.acc}, {"tpr", c.tpr}, {"tnr", c.tnr}};
      },
      py::arg("machine"), py::arg("human"), py::arg("threshold"));
  m.def(
      "acc_at_fpr",
      [](const std::vector<double>& machine, const std::vector<double>& human,
         double target) { return acc_at_fpr(scored_set(machine, human), target); },
      py::arg("machine"), py::arg("human"), py::arg("target_fpr") = kTargetFpr);
  m.def(
      "bench_csv",
      [](const std::vector<std::tuple<std::string, std::string, std::vector<double>,
                                      std::vector<double>>>& sets,
         std::optional<std::string> baseline) {
        std::vector<ScoredSet> scored;
        for (const auto& [det, data, machine, human] : sets) {
          auto s = scored_set(machine, human);
          s.detector_id = det;
          s.dataset_id = data;
          scored.push_back(std::move(s));
        }
        BenchOptions opts;
        opts.baseline_dataset = baseline;
        return bench(scored, ThresholdRegistry::defaults(), opts).to_csv();
      },
      py::arg("sets"), py::arg("baseline") = std::nullopt,
      "Bench report CSV from (detector, dataset, machine_scores, human_scores) tuples.");

  // --- textstats
  m.def("lexical_profile", [](const std::string& text) {
    const auto p = lexical_profile(text);
    return py::dict(py::arg("ttr") = p.ttr, py::arg("yules_k") = p.yules_k,
                    py::arg("bigram_vocab_size") = p.bigram_vocab_size);
  });
  m.def("readability_profile", [](const std::string& text) {
    const auto r = readability_profile(text);
    return py::dict(py::arg("flesch_reading_ease") = r.flesch_reading_ease,
                    py::arg("smog") = r.smog, py::arg("dale_chall") = r.dale_chall);
  });
  m.def("content_similarity", [](const std::string& cand, const std::string& ref) {
    const auto s = content_similarity(cand, ref);
    return py::dict(py::arg("rouge1_f1") = s.rouge1_f1, py::arg("rouge2_f1") = s.rouge2_f1,
                    py::arg("rougeL_f1") = s.rougeL_f1, py::arg("bleu") = s.bleu);
  });
  m.def("overlap_profile",
        [](const std::vector<std::string>& machine, const std::vector<std::string>& human,
           const std::vector<int>& orders) { return overlap_profile(machine, human, orders); });

  // --- corpus
  m.def(
      "normalize_jsonl",
      [](const std::string& content) {
        const auto records = parse_jsonl(content);
        check_unique_ids(records);
        return emit_jsonl(records);
      },
      "Parses and re-emits a JSONL corpus in schema key order.");
  m.def("balance_csv", [](const std::string& content) {
    return balance_check(pair_by_title(parse_jsonl(content))).to_csv();
  });

  // --- detector
  m.def(
      "train_detector_accuracy",
      [](const std::string& content, int epochs) {
        const auto corpus = pair_by_title(parse_jsonl(content));
        FeatureSpec f;
        TrainHyper h;
        h.epochs = epochs;
        const auto trained = train(DetectorParams::zeros(f.dimension), corpus, f, h);
        std::vector<LabeledFeatures> all;
        for (const auto& p : corpus.pairs) {
          all.push_back({featurize(p.human.text, f), kHumanLabel});
          for (const auto& mr : p.machines) {
            all.push_back({featurize(mr.text, f), kMachineLabel});
          }
        }
        return accuracy(trained.params, all);
      },
      py::arg("jsonl"), py::arg("epochs") = 20,
      "Trains a hashed n-gram detector and returns its training accuracy.");
  m.def(
      "separable_corpus",
      [](std::size_t per_class, std::uint64_t seed, bool shifted) {
        return emit_jsonl(separable_corpus(per_class, seed, shifted));
      },
      py::arg("per_class"), py::arg("seed") = 0, py::arg("shifted") = false);

  // --- rldf
  m.def("compute_advantages",
        [](const std::vector<double>& r) { return compute_advantages(r); });
  m.def(
      "route_detector",
      [](const std::string& domain, const std::string& policy, const std::string& mode,
         int parity) {
        return route_detector(domain, policy, parse_cross_mode(mode),
                              GroupAssignment::reference_default(), parity);
      },
      py::arg("domain"), py::arg("policy"), py::arg("mode"), py::arg("parity") = 0);
  m.def(
      "run_arena",
      [](const std::string& mode, int rounds, std::uint64_t seed,
         std::size_t titles_per_domain, std::size_t grpo_steps) {
        ArenaSpec spec;
        spec.titles_per_domain = titles_per_domain;
        const auto arena = make_arena(spec);
        RldfConfig cfg;
        cfg.mode = parse_cross_mode(mode);
        cfg.seed = seed;
        cfg.grpo_steps = grpo_steps;
        RoundState state;
        state.policies = arena.policies;
        const auto result = run_adversarial(state, arena.world, cfg, rounds);
        return history_csv(result.history);
      },
      py::arg("mode") = "cd", py::arg("rounds") = 1, py::arg("seed") = 0,
      py::arg("titles_per_domain") = 40, py::arg("grpo_steps") = 30,
      "Runs RLDF rounds on the toy arena and returns the round-history CSV.");

  // --- pipeline
  m.def(
      "build_arena_variant",
      [](const std::string& variant, std::size_t titles_per_domain, std::uint64_t seed,
         std::optional<std::string> prefix, std::optional<std::string> suffix) {
        ArenaSpec spec;
        spec.titles_per_domain = titles_per_domain;
        const auto arena = make_arena(spec);
        VariantSpec v;
        v.variant_id = variant;
        v.presets = default_presets();
        v.seed = seed;
        if (prefix) v.stages.push_back({StageKind::kPrefix, *prefix, true});
        if (suffix) v.stages.push_back({StageKind::kSuffix, *suffix, true});
        return emit_jsonl(build_variant(arena.world.human_records, arena_registry(arena), v));
      },
      py::arg("variant"), py::arg("titles_per_domain") = 5, py::arg("seed") = 0,
      py::arg("prefix") = std::nullopt, py::arg("suffix") = std::nullopt,
      "Generates a JSONL variant from the toy arena's generators.");
  m.def("user_prompt",
        [](const std::string& domain, const std::string& title,
           std::optional<std::string> suffix) {
          std::vector<AlignmentStage> stages;
          if (suffix) stages.push_back({StageKind::kSuffix, *suffix, true});
          return apply_stages(make_prompt(domain, title), stages).user_prompt();
        },
        py::arg("domain"), py::arg("title"), py::arg("suffix") = std::nullopt);
}
