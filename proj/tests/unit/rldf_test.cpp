#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "maga/arena.hpp"
#include "maga/error.hpp"
#include "maga/rldf.hpp"
#include "maga/rng.hpp"
#include "oracles.hpp"

using namespace maga;

namespace {

GroupAssignment small_assignment() {
  GroupAssignment a;
  a.domains_a = {"Wikipedia"};
  a.domains_b = {"Reddit"};
  a.models_a = {"Qwen3-8B"};
  a.models_b = {"Llama-3.1-8B-Instruct"};
  return a;
}

RolloutGroup random_group(CounterRng& rng, std::size_t v, std::size_t g,
                          std::size_t max_len) {
  RolloutGroup out;
  out.prompt = rng.uniform() < 0.5 ? Context::start()
                                   : Context::token(static_cast<TokenId>(rng.below(v)));
  for (std::size_t j = 0; j < g; ++j) {
    std::vector<TokenId> seq(1 + rng.below(max_len));
    for (auto& t : seq) t = static_cast<TokenId>(rng.below(v));
    out.sequences.push_back(seq);
    out.rewards.push_back(rng.uniform());
  }
  out.finalize();
  return out;
}

PolicyParams random_policy(CounterRng& rng, std::size_t v, double scale = 1.0) {
  PolicyParams p(v);
  for (auto& x : p.data()) x = scale * rng.normal();
  return p;
}

// Reduced round settings for unit-test speed.
RldfConfig quick_config(CrossMode mode) {
  RldfConfig c;
  c.mode = mode;
  c.grpo_steps = 6;
  c.prompts_per_step = 4;
  c.eval_prompts = 6;
  c.eval_rollouts_per_prompt = 2;
  c.seed = 3;
  return c;
}

ArenaSpec quick_arena() {
  ArenaSpec s;
  s.titles_per_domain = 10;
  return s;
}

}  // namespace

TEST(Assignment, DefaultIsDisjointAndSplitsSixSix) {
  const auto a = GroupAssignment::reference_default();
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.domains_a.size() + a.domains_b.size(), 10u);
  EXPECT_EQ(a.models_a.size(), 6u);
  EXPECT_EQ(a.models_b.size(), 6u);
  EXPECT_TRUE(a.in_domains_a("Wikipedia"));
  EXPECT_TRUE(a.in_domains_a("S2ORC"));
  const auto back = assignment_from_json(assignment_to_json(a));
  EXPECT_EQ(back.models_b, a.models_b);
  auto bad = a;
  bad.models_b.insert(*a.models_a.begin());
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Route, HandCases) {
  const auto a = small_assignment();
  EXPECT_EQ(route_detector("Wikipedia", "Qwen3-8B", CrossMode::kCrossDomain, a, 0), "DB");
  EXPECT_EQ(route_detector("Reddit", "Qwen3-8B", CrossMode::kCrossDomain, a, 0), "DA");
  EXPECT_EQ(route_detector("Reddit", "Qwen3-8B", CrossMode::kCrossModel, a, 0), "MB");
  EXPECT_EQ(route_detector("Reddit", "Llama-3.1-8B-Instruct", CrossMode::kCrossModel, a, 0), "MA");
  EXPECT_EQ(route_detector("Wikipedia", "Qwen3-8B", CrossMode::kCrossModelDomain, a, 0), "MB+DB");
  EXPECT_EQ(route_detector("Reddit", "Qwen3-8B", CrossMode::kCrossModelDomain, a, 1), "MB+DA");
  EXPECT_EQ(route_detector("Reddit", "Llama-3.1-8B-Instruct", CrossMode::kCrossModelDomain, a, 0), "MA+DA");
  EXPECT_EQ(route_detector("nowhere", "x", CrossMode::kPlain, a, 0), "global");
  EXPECT_THROW(route_detector("Reddit", "Qwen3-8B", CrossMode::kCrossModelDomain, a, 0),
               ValidationError);
  EXPECT_THROW(route_detector("nowhere", "Qwen3-8B", CrossMode::kCrossDomain, a, 0),
               ValidationError);
  EXPECT_THROW(route_detector("Reddit", "ghost", CrossMode::kCrossModel, a, 0),
               ValidationError);
}

TEST(Route, InvolutionOnGroups) {
  const auto a = small_assignment();
  // A representative sample of each group.
  auto domain_of = [](std::string_view det) {
    return det == "DA" ? std::string("Wikipedia") : std::string("Reddit");
  };
  auto model_of = [](std::string_view det) {
    return det == "MA" ? std::string("Qwen3-8B") : std::string("Llama-3.1-8B-Instruct");
  };
  for (const std::string d : {"Wikipedia", "Reddit"}) {
    const auto once = route_detector(d, "Qwen3-8B", CrossMode::kCrossDomain, a, 0);
    const auto twice =
        route_detector(domain_of(once), "Qwen3-8B", CrossMode::kCrossDomain, a, 0);
    EXPECT_EQ(twice, a.in_domains_a(d) ? "DA" : "DB");
  }
  for (const std::string m : {"Qwen3-8B", "Llama-3.1-8B-Instruct"}) {
    const auto once = route_detector("Reddit", m, CrossMode::kCrossModel, a, 0);
    const auto twice =
        route_detector("Reddit", model_of(once), CrossMode::kCrossModel, a, 0);
    EXPECT_EQ(twice, a.in_models_a(m) ? "MA" : "MB");
  }
}

TEST(Route, DetectorsPerMode) {
  EXPECT_EQ(detectors_for(CrossMode::kPlain, 0), std::vector<std::string>{"global"});
  EXPECT_EQ(detectors_for(CrossMode::kCrossModelDomain, 0),
            (std::vector<std::string>{"MA+DA", "MB+DB"}));
  EXPECT_EQ(detectors_for(CrossMode::kCrossModelDomain, 1),
            (std::vector<std::string>{"MA+DB", "MB+DA"}));
  EXPECT_EQ(parse_cross_mode("cmd"), CrossMode::kCrossModelDomain);
  EXPECT_EQ(to_string(CrossMode::kCrossDomain), "cd");
  EXPECT_THROW(parse_cross_mode("xx"), ValidationError);
}

TEST(Advantages, HandValuesAndCentering) {
  const std::vector<double> r{0.2, 0.4, 0.6};
  const auto a = compute_advantages(r);
  EXPECT_NEAR(a[0], -0.2, 1e-15);
  EXPECT_NEAR(a[1], 0.0, 1e-15);
  EXPECT_NEAR(a[2], 0.2, 1e-15);
  const std::vector<double> flat{0.3, 0.3};
  EXPECT_EQ(compute_advantages(flat), (std::vector<double>{0.0, 0.0}));
  const std::vector<double> one{0.5};
  EXPECT_THROW(compute_advantages(one), ValidationError);

  CounterRng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(2 + rng.below(10));
    for (auto& v : x) v = rng.uniform();
    double sum = 0;
    for (double v : compute_advantages(x)) sum += v;
    EXPECT_NEAR(sum, 0.0, 1e-12);
  }
}

TEST(Grpo, HandValues) {
  // Two-token vocabulary with log pi(token 0 | start) = -1.
  PolicyParams p(2);
  p.at(p.row_index(Context::start()), 1) = std::log(std::exp(1.0) - 1.0);
  RolloutGroup g;
  g.sequences = {{0}};
  g.rewards = {0.7};
  g.advantages = {0.2};
  const std::vector<RolloutGroup> rollouts{g};
  EXPECT_NEAR(grpo_objective(p, p, rollouts, 0.0), -0.2, 1e-12);

  RolloutGroup even;
  even.sequences = {{0, 1}, {1}};
  even.rewards = {0.4, 0.4};
  even.finalize();
  const std::vector<RolloutGroup> flat{even};
  EXPECT_EQ(grpo_objective(p, p, flat, 0.5), 0.0);
  EXPECT_EQ(grpo_update(p, flat, p, 0.0, 1.0), p);
  EXPECT_EQ(grpo_update(p, rollouts, p, 0.3, 0.0), p);
  EXPECT_THROW(grpo_update(p, rollouts, p, 0.0, -1.0), ValidationError);
  EXPECT_THROW(grpo_objective(PolicyParams(3), p, rollouts, 0.0), ValidationError);
}

TEST(Grpo, GradientMatchesFiniteDifferences) {
  CounterRng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t v = 2 + rng.below(7);
    const auto old = random_policy(rng, v);
    const auto cur = random_policy(rng, v);
    std::vector<RolloutGroup> groups;
    const std::size_t ng = 1 + rng.below(3);
    for (std::size_t k = 0; k < ng; ++k) groups.push_back(random_group(rng, v, 2 + rng.below(3), 4));
    const double beta = rng.uniform();
    for (auto dir : {KlDirection::kOldToNew, KlDirection::kNewToOld}) {
      const auto eval = grpo_evaluate(cur, old, groups, beta, dir);
      const auto fd = oracle::finite_difference(
          [&](const std::vector<double>& x) {
            PolicyParams q = cur;
            q.data() = x;
            return grpo_objective(q, old, groups, beta, dir);
          },
          cur.data(), 1e-5);
      EXPECT_LE(oracle::relative_error(eval.gradient, fd), 1e-4);
    }
  }
}

TEST(Grpo, KlNonNegativeAndZeroAtOld) {
  CounterRng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t v = 2 + rng.below(6);
    const auto old = random_policy(rng, v);
    const auto cur = random_policy(rng, v);
    const std::vector<RolloutGroup> groups{random_group(rng, v, 3, 4)};
    for (auto dir : {KlDirection::kOldToNew, KlDirection::kNewToOld}) {
      EXPECT_GE(grpo_evaluate(cur, old, groups, 1.0, dir, false).mean_kl, 0.0);
      EXPECT_EQ(grpo_evaluate(old, old, groups, 1.0, dir, false).mean_kl, 0.0);
    }
  }
}

TEST(Grpo, BaselineInvariance) {
  CounterRng rng(44);
  const std::size_t v = 5;
  const auto old = random_policy(rng, v);
  const auto cur = random_policy(rng, v);
  auto g = random_group(rng, v, 4, 4);
  auto shifted = g;
  for (auto& r : shifted.rewards) r += 0.25;
  shifted.finalize();
  for (std::size_t j = 0; j < g.advantages.size(); ++j) {
    EXPECT_NEAR(shifted.advantages[j], g.advantages[j], 1e-12);
  }
  const std::vector<RolloutGroup> a{g}, b{shifted};
  EXPECT_NEAR(grpo_objective(cur, old, a, 0.1), grpo_objective(cur, old, b, 0.1), 1e-12);
  const auto ua = grpo_update(cur, a, old, 0.1, 0.5);
  const auto ub = grpo_update(cur, b, old, 0.1, 0.5);
  for (std::size_t i = 0; i < ua.data().size(); ++i) {
    EXPECT_NEAR(ua.data()[i], ub.data()[i], 1e-12);
  }
}

TEST(Grpo, NonFiniteGradientIsRuntimeError) {
  PolicyParams p(2);
  RolloutGroup g;
  g.sequences = {{0}, {1}};
  g.rewards = {0.0, 1.0};
  g.finalize();
  g.advantages[0] = INFINITY;
  const std::vector<RolloutGroup> rollouts{g};
  EXPECT_THROW(grpo_update(p, rollouts, p, 0.0, 1.0), RuntimeError);
}

TEST(Grpo, LargerBetaKeepsKlSmaller) {
  // Stationary toy: token 0 is rewarded from the start row.
  PolicyParams base(2);
  RolloutGroup g;
  g.sequences = {{0}, {1}};
  g.rewards = {1.0, 0.0};
  g.finalize();
  const std::vector<RolloutGroup> rollouts{g};
  double previous = INFINITY;
  for (double beta : {0.0, 0.1, 1.0, 10.0}) {
    PolicyParams p = base;
    for (int step = 0; step < 1000; ++step) p = grpo_update(p, rollouts, base, beta, 0.05);
    const double kl = step_kl(base, p, Context::start());
    EXPECT_LE(kl, previous + 1e-12) << beta;
    previous = kl;
  }
}

TEST(Grpo, SingleGroupTrainingRaisesReward) {
  const auto vocab = Vocabulary::with_words({"good", "bad", "meh"});
  const TokenId good = vocab.id("good");
  PolicyParams p(vocab.size(), vocab.end_id());
  const auto cfg = SamplerConfig::identity(4);
  auto reward_of = [&](const std::vector<TokenId>& seq) {
    double n = 0;
    for (TokenId t : seq) n += t == good;
    return n / static_cast<double>(seq.size());
  };
  auto fresh_mean = [&](const PolicyParams& q) {
    double sum = 0;
    for (std::uint64_t s = 0; s < 400; ++s) {
      sum += reward_of(sample_sequence(q, cfg, derive_seed(99, s)).tokens);
    }
    return sum / 400.0;
  };
  const double before = fresh_mean(p);
  for (int step = 0; step < 200; ++step) {
    const PolicyParams old = p;
    RolloutGroup g;
    for (std::uint64_t j = 0; j < 4; ++j) {
      const auto t = sample_sequence(p, cfg, derive_seed(5, step * 4 + j));
      g.sequences.push_back(t.tokens);
      g.rewards.push_back(reward_of(t.tokens));
    }
    g.finalize();
    const std::vector<RolloutGroup> rollouts{g};
    p = grpo_update(p, rollouts, old, 0.0, 0.5);
  }
  EXPECT_GT(fresh_mean(p), before);
}

TEST(RldfConfig, JsonRoundTripAndValidation) {
  RldfConfig c;
  c.mode = CrossMode::kCrossModel;
  c.kl_direction = KlDirection::kNewToOld;
  c.cross_mix_fraction = 0.25;
  const auto back = rldf_config_from_json(rldf_config_to_json(c));
  EXPECT_EQ(back.mode, c.mode);
  EXPECT_EQ(back.kl_direction, c.kl_direction);
  EXPECT_EQ(back.cross_mix_fraction, 0.25);
  EXPECT_EQ(back.group_size, 4u);
  EXPECT_EQ(rldf_config_from_json(nlohmann::json::object()).learning_rate, 2.0);
  RldfConfig bad;
  bad.group_size = 1;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Arena, ShapeAndDialects) {
  const auto arena = make_arena(quick_arena());
  EXPECT_EQ(arena.policies.size(), 4u);
  EXPECT_EQ(arena.world.human_records.size(), 40u);
  EXPECT_NO_THROW(arena.world.assignment.validate());
  for (const auto& h : arena.world.human_records) {
    EXPECT_FALSE(h.text.empty());
    for (const auto& m : arena::kMachineMarkers) {
      EXPECT_EQ((" " + h.text + " ").find(" " + m + " "), std::string::npos);
    }
  }
  const auto pf = arena.policy_file("Qwen3-8B");
  EXPECT_TRUE(pf.vocabulary.find(arena::prompt_symbol("Reddit")).has_value());
  const auto spec = arena_spec_from_json(arena_spec_to_json(quick_arena()));
  EXPECT_EQ(spec.titles_per_domain, 10u);
}

TEST(Arena, SeparableCorpusSaturatesInDistributionOnly) {
  const auto corpus = pair_by_title(separable_corpus(100, 1));
  FeatureSpec f;
  const auto trained = train(DetectorParams::zeros(f.dimension), corpus, f, TrainHyper{});
  std::vector<LabeledFeatures> in, shifted;
  for (const auto& p : corpus.pairs) {
    in.push_back({featurize(p.human.text, f), kHumanLabel});
    for (const auto& m : p.machines) in.push_back({featurize(m.text, f), kMachineLabel});
  }
  for (const auto& p : pair_by_title(separable_corpus(100, 2, true)).pairs) {
    shifted.push_back({featurize(p.human.text, f), kHumanLabel});
    for (const auto& m : p.machines) shifted.push_back({featurize(m.text, f), kMachineLabel});
  }
  EXPECT_GE(accuracy(trained.params, in), 0.99);
  EXPECT_LE(accuracy(trained.params, shifted), 0.80);
}

TEST(Round, ProtocolShapeParityAndDeterminism) {
  const auto arena = make_arena(quick_arena());
  RoundState s;
  s.policies = arena.policies;
  const auto cfg = quick_config(CrossMode::kCrossModelDomain);
  const auto r1 = run_round(s, arena.world, cfg);
  EXPECT_EQ(r1.round, 1);
  EXPECT_EQ(r1.parity, 1);
  EXPECT_EQ(r1.history.size(), 4u);
  EXPECT_EQ(r1.detectors.count("MA+DA"), 1u);
  const auto r2 = run_round(r1, arena.world, cfg);
  EXPECT_EQ(r2.parity, 0);
  EXPECT_EQ(r2.detectors.count("MA+DB"), 1u);
  EXPECT_EQ(history_csv(run_round(s, arena.world, cfg).history), history_csv(r1.history));
  const auto csv = history_csv(r2.history);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "round,parity,policy_id,mean_reward,mean_kl,detector_train_acc,cross_auc");
  for (const auto& row : r2.history) {
    EXPECT_GE(row.mean_reward, 0.0);
    EXPECT_LE(row.mean_reward, 1.0);
    EXPECT_GE(row.mean_kl, 0.0);
  }
}

TEST(Round, PlainAgainstSaturatedDetectorBarelyMoves) {
  const auto arena = make_arena(quick_arena());
  RoundState s;
  s.policies = arena.policies;
  auto cfg = quick_config(CrossMode::kPlain);
  cfg.detector_hyper = saturating_hyper();
  const auto r = run_round(s, arena.world, cfg);
  for (const auto& row : r.history) {
    EXPECT_LT(row.max_abs_param_change, 1e-6) << row.policy_id;
    EXPECT_EQ(row.detector_train_acc, 1.0);
  }
}

TEST(Round, EmptyPromptSetIsAnError) {
  auto arena = make_arena(quick_arena());
  std::erase_if(arena.world.human_records,
                [](const DocumentRecord& r) { return r.domain == "Reddit" || r.domain == "Amazon Reviews"; });
  RoundState s;
  s.policies = arena.policies;
  EXPECT_THROW(run_round(s, arena.world, quick_config(CrossMode::kCrossModelDomain)),
               ValidationError);
}

TEST(Adversarial, HistoryLengthAndConvergenceBookkeeping) {
  const auto arena = make_arena(quick_arena());
  RoundState s;
  s.policies = arena.policies;
  auto cfg = quick_config(CrossMode::kCrossDomain);
  cfg.grpo_steps = 2;
  const auto one = run_adversarial(s, arena.world, cfg, 1);
  EXPECT_EQ(one.history.size(), 4u);
  EXPECT_EQ(round_mean_rewards(one.history).size(), 1u);
  EXPECT_EQ(one.policies_per_round.size(), 1u);
  EXPECT_FALSE(one.converged_round.has_value());
  RoundState t;
  t.policies = arena.policies;
  EXPECT_THROW(run_adversarial(t, arena.world, cfg, 0), ValidationError);
}
