#include "maga/rldf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "maga/error.hpp"
#include "maga/evalbench.hpp"
#include "maga/rng.hpp"
#include "maga/text_io.hpp"

namespace maga {

// ---------------------------------------------------------------------------
// Groups and routing

void GroupAssignment::validate() const {
  for (const auto& d : domains_a) {
    if (domains_b.count(d)) {
      throw ValidationError("domain in both DA and DB: " + d);
    }
  }
  for (const auto& m : models_a) {
    if (models_b.count(m)) throw ValidationError("model in both MA and MB: " + m);
  }
}

GroupAssignment GroupAssignment::reference_default() {
  GroupAssignment a;
  a.domains_a = {"Wikipedia", "wikiHow", "CC News", "NPR News", "S2ORC"};
  a.domains_b = {"Reddit", "Trustpilot Reviews", "Amazon Reviews",
                 "Yahoo Answers", "Natural Questions"};
  a.models_a = {"Qwen3-plus",     "Qwen3-8B",           "DeepSeek-V3",
                "DeepSeek-R1-0528-Qwen3-8B", "Hunyuan-TurboS",
                "Hunyuan-7B-Instruct"};
  a.models_b = {"Llama-3.1-8B-Instruct", "Mistral-Medium",
                "Ministral-8B-Instruct-2410", "Gemini-2.0-flash",
                "GPT-4o-mini", "gemma-3-12b-it"};
  return a;
}

nlohmann::json assignment_to_json(const GroupAssignment& a) {
  return {{"DA", a.domains_a}, {"DB", a.domains_b},
          {"MA", a.models_a},  {"MB", a.models_b}};
}

GroupAssignment assignment_from_json(const nlohmann::json& j) {
  GroupAssignment a;
  try {
    a.domains_a = j.value("DA", std::set<std::string>{});
    a.domains_b = j.value("DB", std::set<std::string>{});
    a.models_a = j.value("MA", std::set<std::string>{});
    a.models_b = j.value("MB", std::set<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed assignment: ") + e.what());
  }
  a.validate();
  return a;
}

CrossMode parse_cross_mode(std::string_view name) {
  if (name == "plain") return CrossMode::kPlain;
  if (name == "cd") return CrossMode::kCrossDomain;
  if (name == "cm") return CrossMode::kCrossModel;
  if (name == "cmd") return CrossMode::kCrossModelDomain;
  throw ValidationError("mode must be one of plain, cd, cm, cmd");
}

std::string_view to_string(CrossMode mode) {
  switch (mode) {
    case CrossMode::kPlain: return "plain";
    case CrossMode::kCrossDomain: return "cd";
    case CrossMode::kCrossModel: return "cm";
    case CrossMode::kCrossModelDomain: return "cmd";
  }
  return "?";
}

std::string detector_id::composite(bool model_group_a, bool domain_group_a) {
  return std::string(model_group_a ? kModelA : kModelB) + "+" +
         std::string(domain_group_a ? kDomainA : kDomainB);
}

namespace {

bool domain_group_a(std::string_view domain, const GroupAssignment& a) {
  if (a.in_domains_a(domain)) return true;
  if (a.in_domains_b(domain)) return false;
  throw ValidationError("domain not in any group: " + std::string(domain));
}

bool model_group_a(std::string_view policy, const GroupAssignment& a) {
  if (a.in_models_a(policy)) return true;
  if (a.in_models_b(policy)) return false;
  throw ValidationError("policy not in any group: " + std::string(policy));
}

}  // namespace

std::string route_detector(std::string_view domain, std::string_view policy_id,
                           CrossMode mode, const GroupAssignment& assignment,
                           int parity) {
  switch (mode) {
    case CrossMode::kPlain:
      return std::string(detector_id::kGlobal);
    case CrossMode::kCrossDomain:
      return std::string(domain_group_a(domain, assignment)
                             ? detector_id::kDomainB
                             : detector_id::kDomainA);
    case CrossMode::kCrossModel:
      return std::string(model_group_a(policy_id, assignment)
                             ? detector_id::kModelB
                             : detector_id::kModelA);
    case CrossMode::kCrossModelDomain: {
      if (parity != 0 && parity != 1) {
        throw ValidationError("parity must be 0 or 1");
      }
      const bool ma = model_group_a(policy_id, assignment);
      const bool da = domain_group_a(domain, assignment);
      // Parity 0 pairs (MA, DA) with (MB, DB); parity 1 pairs (MA, DB)
      // with (MB, DA).
      const bool active = parity == 0 ? ma == da : ma != da;
      if (!active) {
        throw ValidationError("sample (" + std::string(policy_id) + ", " +
                              std::string(domain) +
                              ") is not in an active group at parity " +
                              std::to_string(parity));
      }
      return detector_id::composite(!ma, !da);
    }
  }
  throw ValidationError("unknown cross mode");
}

std::vector<std::string> detectors_for(CrossMode mode, int parity) {
  using namespace detector_id;
  switch (mode) {
    case CrossMode::kPlain: return {std::string(kGlobal)};
    case CrossMode::kCrossDomain: return {std::string(kDomainA), std::string(kDomainB)};
    case CrossMode::kCrossModel: return {std::string(kModelA), std::string(kModelB)};
    case CrossMode::kCrossModelDomain:
      return parity == 0 ? std::vector<std::string>{composite(true, true),
                                                    composite(false, false)}
                         : std::vector<std::string>{composite(true, false),
                                                    composite(false, true)};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Advantages and the GRPO objective

std::vector<double> compute_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) {
    throw ValidationError("a rollout group needs at least 2 samples");
  }
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                      static_cast<double>(rewards.size());
  std::vector<double> out(rewards.size());
  for (std::size_t j = 0; j < rewards.size(); ++j) out[j] = rewards[j] - mean;
  return out;
}

void RolloutGroup::finalize() {
  if (rewards.size() != sequences.size()) {
    throw ValidationError("one reward per rollout sequence is required");
  }
  advantages = compute_advantages(rewards);
}

ObjectiveValue grpo_evaluate(const PolicyParams& policy,
                             const PolicyParams& old_policy,
                             std::span<const RolloutGroup> rollouts,
                             double beta, KlDirection direction,
                             bool with_gradient) {
  if (policy.vocab_size() != old_policy.vocab_size()) {
    throw ValidationError("policy and old policy have different shapes");
  }
  if (rollouts.empty()) throw ValidationError("no rollouts");
  if (!(beta >= 0.0)) throw ValidationError("beta must be >= 0");
  const std::size_t v = policy.vocab_size();

  std::size_t sequences = 0;
  std::size_t steps = 0;
  for (const auto& g : rollouts) {
    if (g.advantages.size() != g.sequences.size()) {
      throw ValidationError("advantages not computed for rollout group " +
                            g.prompt_id);
    }
    sequences += g.sequences.size();
    for (const auto& s : g.sequences) steps += s.size();
  }
  if (sequences == 0) throw ValidationError("no rollout sequences");

  // Row caches: the log-softmax of each visited context under both policies.
  const std::size_t rows = policy.rows();
  std::vector<std::vector<double>> lp_new(rows), lp_old(rows);
  auto cached = [&](std::vector<std::vector<double>>& cache,
                    const PolicyParams& p, Context ctx) -> const std::vector<double>& {
    auto& slot = cache[p.row_index(ctx)];
    if (slot.empty()) slot = log_softmax(p.row(ctx));
    return slot;
  };

  ObjectiveValue out;
  if (with_gradient) out.gradient.assign(policy.data().size(), 0.0);
  const double inv_seq = 1.0 / static_cast<double>(sequences);
  const double inv_steps = steps > 0 ? 1.0 / static_cast<double>(steps) : 0.0;
  double policy_term = 0.0;
  double kl_sum = 0.0;

  for (const auto& g : rollouts) {
    for (std::size_t j = 0; j < g.sequences.size(); ++j) {
      const double adv = g.advantages[j];
      Context ctx = g.prompt;
      double logprob = 0.0;
      for (TokenId tok : g.sequences[j]) {
        if (tok >= v) {
          throw ValidationError("rollout token out of vocabulary");
        }
        const auto& lnew = cached(lp_new, policy, ctx);
        const auto& lold = cached(lp_old, old_policy, ctx);
        logprob += lnew[tok];

        double kl = 0.0;
        if (direction == KlDirection::kOldToNew) {
          for (std::size_t i = 0; i < v; ++i) {
            kl += std::exp(lold[i]) * (lold[i] - lnew[i]);
          }
        } else {
          for (std::size_t i = 0; i < v; ++i) {
            kl += std::exp(lnew[i]) * (lnew[i] - lold[i]);
          }
        }
        kl_sum += kl;

        if (with_gradient) {
          double* row = out.gradient.data() + policy.row_index(ctx) * v;
          const double a = adv * inv_seq;
          const double b = beta * inv_steps;
          for (std::size_t i = 0; i < v; ++i) {
            const double p = std::exp(lnew[i]);
            double d_logpi = (i == tok ? 1.0 : 0.0) - p;
            double d_kl = 0.0;
            if (direction == KlDirection::kOldToNew) {
              d_kl = p - std::exp(lold[i]);
            } else {
              d_kl = p * ((lnew[i] - lold[i]) - kl);
            }
            row[i] += a * d_logpi - b * d_kl;
          }
        }
        ctx = Context::token(tok);
      }
      policy_term += adv * logprob;
    }
  }
  out.policy_term = policy_term * inv_seq;
  out.mean_kl = kl_sum * inv_steps;
  out.value = out.policy_term - beta * out.mean_kl;
  return out;
}

double grpo_objective(const PolicyParams& policy, const PolicyParams& old_policy,
                      std::span<const RolloutGroup> rollouts, double beta,
                      KlDirection direction) {
  return grpo_evaluate(policy, old_policy, rollouts, beta, direction, false)
      .value;
}

PolicyParams grpo_update(const PolicyParams& policy,
                         std::span<const RolloutGroup> rollouts,
                         const PolicyParams& old_policy, double beta,
                         double learning_rate, KlDirection direction) {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning rate must be finite and >= 0");
  }
  const auto eval =
      grpo_evaluate(policy, old_policy, rollouts, beta, direction, true);
  PolicyParams next = policy;
  auto& table = next.data();
  const std::size_t v = policy.vocab_size();
  for (std::size_t k = 0; k < table.size(); ++k) {
    if (!std::isfinite(eval.gradient[k])) {
      throw RuntimeError("non-finite gradient at row " + std::to_string(k / v) +
                         ", column " + std::to_string(k % v));
    }
    table[k] += learning_rate * eval.gradient[k];
  }
  return next;
}

// ---------------------------------------------------------------------------
// Configuration

Context RldfWorld::prompt_for(std::string_view domain) const {
  auto it = domain_prompts.find(std::string(domain));
  return it == domain_prompts.end() ? Context::start() : it->second;
}

void RldfConfig::validate() const {
  if (group_size < 2) throw ValidationError("group_size must be >= 2");
  if (prompts_per_step < 1) throw ValidationError("prompts_per_step must be >= 1");
  if (!(learning_rate >= 0.0)) throw ValidationError("learning_rate must be >= 0");
  if (!(beta >= 0.0)) throw ValidationError("beta must be >= 0");
  if (max_length < 1) throw ValidationError("max_length must be >= 1");
  if (!(cross_mix_fraction >= 0.0 && cross_mix_fraction <= 1.0)) {
    throw ValidationError("cross_mix_fraction must be in [0, 1]");
  }
  if (eval_prompts < 1 || eval_rollouts_per_prompt < 1) {
    throw ValidationError("evaluation sizes must be >= 1");
  }
  features.validate();
  detector_hyper.validate();
}

nlohmann::json rldf_config_to_json(const RldfConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"group_size", c.group_size},
          {"prompts_per_step", c.prompts_per_step},
          {"grpo_steps", c.grpo_steps},
          {"learning_rate", c.learning_rate},
          {"beta", c.beta},
          {"kl_direction",
           c.kl_direction == KlDirection::kOldToNew ? "old_to_new" : "new_to_old"},
          {"max_length", c.max_length},
          {"features", feature_spec_to_json(c.features)},
          {"detector_hyper", train_hyper_to_json(c.detector_hyper)},
          {"warm_start_detectors", c.warm_start_detectors},
          {"cumulative_detector_data", c.cumulative_detector_data},
          {"cross_mix_fraction", c.cross_mix_fraction},
          {"eval_prompts", c.eval_prompts},
          {"eval_rollouts_per_prompt", c.eval_rollouts_per_prompt},
          {"convergence_tolerance", c.convergence_tolerance},
          {"seed", c.seed}};
}

RldfConfig rldf_config_from_json(const nlohmann::json& j) {
  RldfConfig c;
  try {
    if (j.contains("mode")) c.mode = parse_cross_mode(j["mode"].get<std::string>());
    c.group_size = j.value("group_size", c.group_size);
    c.prompts_per_step = j.value("prompts_per_step", c.prompts_per_step);
    c.grpo_steps = j.value("grpo_steps", c.grpo_steps);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta = j.value("beta", c.beta);
    const auto dir = j.value("kl_direction", std::string("old_to_new"));
    if (dir == "old_to_new") {
      c.kl_direction = KlDirection::kOldToNew;
    } else if (dir == "new_to_old") {
      c.kl_direction = KlDirection::kNewToOld;
    } else {
      throw ValidationError("kl_direction must be old_to_new or new_to_old");
    }
    c.max_length = j.value("max_length", c.max_length);
    if (j.contains("features")) c.features = feature_spec_from_json(j["features"]);
    if (j.contains("detector_hyper")) {
      c.detector_hyper = train_hyper_from_json(j["detector_hyper"]);
    }
    c.warm_start_detectors = j.value("warm_start_detectors", c.warm_start_detectors);
    c.cumulative_detector_data =
        j.value("cumulative_detector_data", c.cumulative_detector_data);
    c.cross_mix_fraction = j.value("cross_mix_fraction", c.cross_mix_fraction);
    c.eval_prompts = j.value("eval_prompts", c.eval_prompts);
    c.eval_rollouts_per_prompt =
        j.value("eval_rollouts_per_prompt", c.eval_rollouts_per_prompt);
    c.convergence_tolerance =
        j.value("convergence_tolerance", c.convergence_tolerance);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed rldf config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Rounds

namespace {

// Domains a policy writes for this round.
std::set<std::string> assigned_domains(std::string_view policy,
                                       const RldfWorld& world,
                                       const RldfConfig& config, int parity) {
  std::set<std::string> all;
  for (const auto& r : world.human_records) all.insert(r.domain);
  if (config.mode != CrossMode::kCrossModelDomain) return all;
  const bool ma = model_group_a(policy, world.assignment);
  const bool use_a = parity == 0 ? ma : !ma;
  return use_a ? world.assignment.domains_a : world.assignment.domains_b;
}

std::vector<const DocumentRecord*> humans_in(
    const RldfWorld& world, const std::set<std::string>& domains) {
  std::vector<const DocumentRecord*> out;
  for (const auto& r : world.human_records) {
    if (domains.count(r.domain)) out.push_back(&r);
  }
  return out;
}

std::string machine_id(int round, std::string_view policy,
                       std::string_view title) {
  const auto h = hash_bytes(std::string(policy) + "\x1f" + std::string(title),
                            static_cast<std::uint64_t>(round));
  return "r" + std::to_string(round) + "-" + std::string(policy) + "-" +
         std::to_string(h % 1000000007ULL);
}

// True when a detector id covers the given (domain, model) sample.
bool detector_covers(std::string_view id, std::string_view domain,
                     std::string_view model, const GroupAssignment& a) {
  using namespace detector_id;
  if (id == kGlobal) return true;
  if (id == kDomainA) return a.in_domains_a(domain);
  if (id == kDomainB) return a.in_domains_b(domain);
  if (id == kModelA) return a.in_models_a(model);
  if (id == kModelB) return a.in_models_b(model);
  const auto plus = id.find('+');
  if (plus == std::string_view::npos) return false;
  const auto m = id.substr(0, plus);
  const auto d = id.substr(plus + 1);
  return detector_covers(m, domain, model, a) &&
         detector_covers(d, domain, model, a);
}

// Humans a detector is trained against.
bool detector_covers_human(std::string_view id, std::string_view domain,
                           const GroupAssignment& a) {
  using namespace detector_id;
  if (id == kGlobal || id == kModelA || id == kModelB) return true;
  if (id == kDomainA) return a.in_domains_a(domain);
  if (id == kDomainB) return a.in_domains_b(domain);
  const auto plus = id.find('+');
  if (plus == std::string_view::npos) return false;
  return detector_covers_human(id.substr(plus + 1), domain, a);
}

struct EvalResult {
  double mean_reward = 0.0;
  double mean_kl = 0.0;
  double auc = 0.5;
  double mean_abs_advantage = 0.0;
};

// Fixed evaluation rollouts: same seeds before and after the update.
EvalResult evaluate_policy(const PolicyParams& policy,
                           const PolicyParams& old_policy,
                           std::string_view policy_id,
                           const std::vector<const DocumentRecord*>& prompts,
                           const RldfWorld& world, const RldfConfig& config,
                           const DetectorParams& detector,
                           std::uint64_t eval_seed, int parity) {
  const auto sampler = SamplerConfig::identity(config.max_length);
  EvalResult out;
  std::vector<double> machine_scores;
  double reward_sum = 0.0;
  double kl_sum = 0.0;
  std::size_t kl_steps = 0;
  std::size_t n = 0;
  const std::size_t count = std::min(config.eval_prompts, prompts.size());
  for (std::size_t p = 0; p < count; ++p) {
    const DocumentRecord& h = *prompts[p];
    (void)route_detector(h.domain, policy_id, config.mode, world.assignment,
                         parity);
    const Context prompt = world.prompt_for(h.domain);
    for (std::size_t g = 0; g < config.eval_rollouts_per_prompt; ++g) {
      const auto trace = sample_sequence(
          policy, sampler, derive_seed(eval_seed, p * 1000 + g), prompt);
      const double s =
          score(detector, featurize(world.vocabulary.decode(trace.tokens),
                                    config.features));
      machine_scores.push_back(s);
      reward_sum += 1.0 - s;
      ++n;
      Context ctx = prompt;
      for (TokenId t : trace.tokens) {
        kl_sum += step_kl(old_policy, policy, ctx);
        ++kl_steps;
        ctx = Context::token(t);
      }
    }
  }
  std::vector<double> human_scores;
  for (const auto* h : prompts) {
    human_scores.push_back(score(detector, featurize(h->text, config.features)));
  }
  out.mean_reward = n ? reward_sum / static_cast<double>(n) : 0.0;
  out.mean_kl = kl_steps ? kl_sum / static_cast<double>(kl_steps) : 0.0;
  if (!machine_scores.empty() && !human_scores.empty()) {
    out.auc = auc(machine_scores, human_scores);
  }
  return out;
}

}  // namespace

RoundState run_round(RoundState state, const RldfWorld& world,
                     const RldfConfig& config) {
  config.validate();
  world.assignment.validate();
  if (state.policies.empty()) throw ValidationError("no policies registered");
  const int round = state.round + 1;
  const int parity = state.parity;
  const std::uint64_t round_seed =
      derive_seed(config.seed, static_cast<std::uint64_t>(round));
  const auto sampler = SamplerConfig::identity(config.max_length);

  // (1) Fresh machine texts: one per (title, policy) on assigned domains.
  std::vector<DocumentRecord> fresh;
  std::map<std::string, std::vector<const DocumentRecord*>> prompts_of;
  for (const auto& [id, policy] : state.policies) {
    const auto domains = assigned_domains(id, world, config, parity);
    auto prompts = humans_in(world, domains);
    if (prompts.empty()) {
      throw ValidationError("empty prompt set for policy " + id);
    }
    for (const auto* h : prompts) {
      (void)route_detector(h->domain, id, config.mode, world.assignment, parity);
      const auto trace = sample_sequence(
          policy, sampler, derive_seed(round_seed, "gen\x1f" + id + "\x1f" + h->title),
          world.prompt_for(h->domain));
      DocumentRecord m;
      m.id = machine_id(round, id, h->title);
      m.title = h->title;
      m.text = world.vocabulary.decode(trace.tokens);
      m.domain = h->domain;
      m.human_source_id = h->id;
      m.model = id;
      m.label = kMachineLabel;
      fresh.push_back(std::move(m));
    }
    prompts_of[id] = std::move(prompts);
  }
  std::vector<DocumentRecord> machine_data = fresh;
  if (config.cumulative_detector_data) {
    state.machine_pool.insert(state.machine_pool.end(), fresh.begin(), fresh.end());
    machine_data = state.machine_pool;
  }

  // (2) Refresh the detectors this mode and parity need.
  for (const auto& det : detectors_for(config.mode, parity)) {
    std::vector<DocumentRecord> records;
    for (const auto& h : world.human_records) {
      if (detector_covers_human(det, h.domain, world.assignment)) {
        records.push_back(h);
      }
    }
    std::set<std::string> present;
    for (const auto& r : records) present.insert(r.title);
    std::vector<const DocumentRecord*> others;
    for (const auto& m : machine_data) {
      if (!present.count(m.title)) continue;
      if (detector_covers(det, m.domain, m.model, world.assignment)) {
        records.push_back(m);
      } else if (config.mode == CrossMode::kCrossModel) {
        others.push_back(&m);
      }
    }
    if (config.cross_mix_fraction > 0.0 && !others.empty()) {
      CounterRng rng(derive_seed(round_seed, "mix\x1f" + det));
      stable_shuffle(std::span<const DocumentRecord*>(others), rng);
      const auto k = static_cast<std::size_t>(
          std::floor(config.cross_mix_fraction * static_cast<double>(others.size())));
      for (std::size_t i = 0; i < k; ++i) records.push_back(*others[i]);
    }
    const auto corpus = pair_by_title(records);
    DetectorParams init = DetectorParams::zeros(config.features.dimension);
    if (config.warm_start_detectors && state.detectors.count(det)) {
      init = state.detectors[det];
    }
    TrainHyper hyper = config.detector_hyper;
    hyper.seed = derive_seed(round_seed, "det\x1f" + det);
    auto trained = train(init, corpus, config.features, hyper);

    std::vector<LabeledFeatures> all;
    for (const auto& p : corpus.pairs) {
      all.push_back({featurize(p.human.text, config.features), kHumanLabel});
      for (const auto& m : p.machines) {
        all.push_back({featurize(m.text, config.features), kMachineLabel});
      }
    }
    state.detector_train_acc[det] = accuracy(trained.params, all);
    state.detectors[det] = std::move(trained.params);
  }

  // (3) GRPO per policy against routed detector rewards.
  for (auto& [id, policy] : state.policies) {
    const PolicyParams old_policy = policy;
    const auto& prompts = prompts_of[id];
    const auto reward_det = route_detector(prompts.front()->domain, id,
                                           config.mode, world.assignment, parity);
    const std::uint64_t policy_seed = derive_seed(round_seed, "policy\x1f" + id);
    const std::uint64_t eval_seed = derive_seed(policy_seed, "eval");

    // Evaluation prompts: a seeded subset of the policy's prompts.
    std::vector<const DocumentRecord*> eval_prompts = prompts;
    {
      CounterRng rng(derive_seed(policy_seed, "eval-prompts"));
      stable_shuffle(std::span<const DocumentRecord*>(eval_prompts), rng);
    }
    const auto& eval_detector = state.detectors.at(reward_det);
    const auto before = evaluate_policy(policy, old_policy, id, eval_prompts, world,
                                        config, eval_detector, eval_seed, parity);

    double abs_adv_sum = 0.0;
    std::size_t adv_count = 0;
    CounterRng prompt_rng(derive_seed(policy_seed, "prompts"));
    for (std::size_t step = 0; step < config.grpo_steps; ++step) {
      std::vector<RolloutGroup> groups;
      for (std::size_t k = 0; k < config.prompts_per_step; ++k) {
        const DocumentRecord& h = *prompts[prompt_rng.below(prompts.size())];
        RolloutGroup g;
        g.prompt_id = h.id;
        g.domain = h.domain;
        g.policy_id = id;
        g.prompt = world.prompt_for(h.domain);
        const auto det = route_detector(h.domain, id, config.mode,
                                        world.assignment, parity);
        const auto& detector = state.detectors.at(det);
        for (std::size_t j = 0; j < config.group_size; ++j) {
          const auto trace = sample_sequence(
              policy, sampler,
              derive_seed(policy_seed, (step * 4096 + k) * 64 + j), g.prompt);
          g.old_logprobs.push_back(sequence_logprob(old_policy, trace.tokens, g.prompt));
          g.rewards.push_back(
              reward(detector, world.vocabulary.decode(trace.tokens), config.features));
          g.sequences.push_back(trace.tokens);
        }
        g.finalize();
        for (double a : g.advantages) {
          abs_adv_sum += std::fabs(a);
          ++adv_count;
        }
        groups.push_back(std::move(g));
      }
      policy = grpo_update(policy, groups, old_policy, config.beta,
                           config.learning_rate, config.kl_direction);
    }

    const auto after = evaluate_policy(policy, old_policy, id, eval_prompts, world,
                                       config, eval_detector, eval_seed, parity);
    RoundSummary s;
    s.round = round;
    s.parity = parity;
    s.policy_id = id;
    s.reward_detector = reward_det;
    s.mean_reward_before = before.mean_reward;
    s.mean_reward = after.mean_reward;
    s.mean_kl = after.mean_kl;
    s.detector_train_acc = state.detector_train_acc.at(reward_det);
    s.cross_auc = after.auc;
    s.mean_abs_advantage =
        adv_count ? abs_adv_sum / static_cast<double>(adv_count) : 0.0;
    for (std::size_t k = 0; k < policy.data().size(); ++k) {
      s.max_abs_param_change = std::max(
          s.max_abs_param_change, std::fabs(policy.data()[k] - old_policy.data()[k]));
    }
    state.history.push_back(std::move(s));
  }

  // (4) Protocol bookkeeping.
  state.round = round;
  if (config.mode == CrossMode::kCrossModelDomain) state.parity ^= 1;
  return state;
}

std::vector<double> round_mean_rewards(std::span<const RoundSummary> history) {
  std::map<int, std::pair<double, std::size_t>> acc;
  for (const auto& s : history) {
    auto& [sum, n] = acc[s.round];
    sum += s.mean_reward;
    ++n;
  }
  std::vector<double> out;
  for (const auto& [round, sn] : acc) {
    out.push_back(sn.first / static_cast<double>(sn.second));
  }
  return out;
}

AdversarialResult run_adversarial(RoundState& state, const RldfWorld& world,
                                  const RldfConfig& config, int rounds) {
  if (rounds < 1) throw ValidationError("rounds must be >= 1");
  AdversarialResult result;
  const auto start = state.history.size();
  int calm = 0;
  double previous = 0.0;
  for (int r = 0; r < rounds; ++r) {
    state = run_round(std::move(state), world, config);
    result.policies_per_round.push_back(state.policies);
    const auto means = round_mean_rewards(
        std::span<const RoundSummary>(state.history).subspan(start));
    const double current = means.back();
    if (r > 0) {
      const double rel = std::fabs(current - previous) /
                         std::max(std::fabs(previous), 1e-12);
      calm = rel < config.convergence_tolerance ? calm + 1 : 0;
      if (calm >= 2 && !result.converged_round) {
        result.converged_round = state.round;
      }
    }
    previous = current;
  }
  result.history.assign(state.history.begin() + static_cast<std::ptrdiff_t>(start),
                        state.history.end());
  return result;
}

std::string history_csv(std::span<const RoundSummary> history) {
  std::string out =
      "round,parity,policy_id,mean_reward,mean_kl,detector_train_acc,cross_auc\n";
  for (const auto& s : history) {
    out += std::to_string(s.round) + "," + std::to_string(s.parity) + "," +
           csv_escape(s.policy_id) + "," + format_fixed(s.mean_reward, 6) + "," +
           format_fixed(s.mean_kl, 6) + "," + format_fixed(s.detector_train_acc, 6) +
           "," + format_fixed(s.cross_auc, 6) + "\n";
  }
  return out;
}

}  // namespace maga
