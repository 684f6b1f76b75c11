#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "maga/corpus.hpp"
#include "maga/detector.hpp"
#include "maga/sampler.hpp"

namespace maga {

/// Domain partition (DA / DB) and generator partition (MA / MB).
struct GroupAssignment {
  std::set<std::string> domains_a;
  std::set<std::string> domains_b;
  std::set<std::string> models_a;
  std::set<std::string> models_b;

  /// Disjointness of both partitions.
  void validate() const;
  /// The ten English domains and twelve generators of the reference
  /// dataset, six generators per model group.
  static GroupAssignment reference_default();

  bool in_domains_a(std::string_view d) const { return domains_a.count(std::string(d)) > 0; }
  bool in_domains_b(std::string_view d) const { return domains_b.count(std::string(d)) > 0; }
  bool in_models_a(std::string_view m) const { return models_a.count(std::string(m)) > 0; }
  bool in_models_b(std::string_view m) const { return models_b.count(std::string(m)) > 0; }
};

nlohmann::json assignment_to_json(const GroupAssignment& a);
GroupAssignment assignment_from_json(const nlohmann::json& j);

enum class CrossMode { kPlain, kCrossDomain, kCrossModel, kCrossModelDomain };

CrossMode parse_cross_mode(std::string_view name);  // plain|cd|cm|cmd
std::string_view to_string(CrossMode mode);

/// Detector ids used by the registry.
namespace detector_id {
inline constexpr std::string_view kGlobal = "global";
inline constexpr std::string_view kDomainA = "DA";
inline constexpr std::string_view kDomainB = "DB";
inline constexpr std::string_view kModelA = "MA";
inline constexpr std::string_view kModelB = "MB";
/// Composite group id such as "MA+DB".
std::string composite(bool model_group_a, bool domain_group_a);
}  // namespace detector_id

/// Which detector rewards a sample drawn from `policy_id` on `domain`.
/// CD and CM return the opposite group's detector; CMD returns the
/// opposite composite group of the current parity (parity 0 pairs MA with
/// DA, parity 1 pairs MA with DB); plain returns the single global one.
std::string route_detector(std::string_view domain, std::string_view policy_id,
                           CrossMode mode, const GroupAssignment& assignment,
                           int parity);

/// The detectors a round trains for `mode` at `parity`.
std::vector<std::string> detectors_for(CrossMode mode, int parity);

struct RolloutGroup {
  std::string prompt_id;
  std::string domain;
  std::string policy_id;
  Context prompt = Context::start();
  std::vector<std::vector<TokenId>> sequences;
  std::vector<double> old_logprobs;
  std::vector<double> rewards;
  std::vector<double> advantages;

  /// Advantages from rewards; checks G >= 2.
  void finalize();
};

/// r_j - mean(r).
std::vector<double> compute_advantages(std::span<const double> rewards);

enum class KlDirection {
  kOldToNew,  // KL(pi_old || pi_theta), the default
  kNewToOld,  // KL(pi_theta || pi_old)
};

struct ObjectiveValue {
  double value = 0.0;
  double policy_term = 0.0;
  double mean_kl = 0.0;
  std::vector<double> gradient;  // same layout as PolicyParams::data()
};

/// Mean over sequences of A * log pi_theta(y|x) minus beta times the mean
/// per-step KL along the rollout contexts. Maximized. `with_gradient`
/// also fills the exact gradient with respect to every logit entry.
ObjectiveValue grpo_evaluate(const PolicyParams& policy,
                             const PolicyParams& old_policy,
                             std::span<const RolloutGroup> rollouts,
                             double beta,
                             KlDirection direction = KlDirection::kOldToNew,
                             bool with_gradient = true);

double grpo_objective(const PolicyParams& policy, const PolicyParams& old_policy,
                      std::span<const RolloutGroup> rollouts, double beta,
                      KlDirection direction = KlDirection::kOldToNew);

/// One gradient-ascent step. Throws RuntimeError naming a non-finite
/// gradient entry.
PolicyParams grpo_update(const PolicyParams& policy,
                         std::span<const RolloutGroup> rollouts,
                         const PolicyParams& old_policy, double beta,
                         double learning_rate,
                         KlDirection direction = KlDirection::kOldToNew);

/// Everything a round reads but never writes.
struct RldfWorld {
  Vocabulary vocabulary;
  std::vector<DocumentRecord> human_records;
  std::map<std::string, Context> domain_prompts;  // missing -> start row
  GroupAssignment assignment;

  Context prompt_for(std::string_view domain) const;
};

struct RldfConfig {
  CrossMode mode = CrossMode::kCrossDomain;
  std::size_t group_size = 4;  // rollouts per prompt
  std::size_t prompts_per_step = 8;
  std::size_t grpo_steps = 30;
  double learning_rate = 2.0;
  double beta = 0.05;
  KlDirection kl_direction = KlDirection::kOldToNew;
  std::size_t max_length = 12;
  FeatureSpec features;
  TrainHyper detector_hyper;
  bool warm_start_detectors = false;
  bool cumulative_detector_data = false;
  /// Fraction of the other model group's MGT mixed into CM detectors.
  double cross_mix_fraction = 0.0;
  std::size_t eval_prompts = 16;
  std::size_t eval_rollouts_per_prompt = 4;
  double convergence_tolerance = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json rldf_config_to_json(const RldfConfig& c);
/// Missing keys keep their defaults.
RldfConfig rldf_config_from_json(const nlohmann::json& j);

struct RoundSummary {
  int round = 0;  // 1-based
  int parity = 0;
  std::string policy_id;
  std::string reward_detector;
  double mean_reward_before = 0.0;
  double mean_reward = 0.0;
  double mean_kl = 0.0;
  double detector_train_acc = 0.0;
  double cross_auc = 0.0;
  double max_abs_param_change = 0.0;
  double mean_abs_advantage = 0.0;
};

struct RoundState {
  int round = 0;
  int parity = 0;
  std::map<std::string, PolicyParams> policies;
  std::map<std::string, DetectorParams> detectors;
  std::map<std::string, double> detector_train_acc;
  std::vector<DocumentRecord> machine_pool;  // cumulative mode only
  std::vector<RoundSummary> history;
};

/// Generate, refresh detectors, GRPO per policy, flip parity (CMD) and
/// append one summary row per policy.
RoundState run_round(RoundState state, const RldfWorld& world,
                     const RldfConfig& config);

struct AdversarialResult {
  std::vector<RoundSummary> history;
  std::vector<std::map<std::string, PolicyParams>> policies_per_round;
  std::optional<int> converged_round;
};

/// Applies run_round `rounds` times. Converged when the relative change of
/// the round-mean reward stays below the tolerance for two consecutive
/// rounds.
AdversarialResult run_adversarial(RoundState& state, const RldfWorld& world,
                                  const RldfConfig& config, int rounds);

/// Header `round,parity,policy_id,mean_reward,mean_kl,detector_train_acc,
/// cross_auc`.
std::string history_csv(std::span<const RoundSummary> history);

/// Mean reward of the round, averaged over policies.
std::vector<double> round_mean_rewards(std::span<const RoundSummary> history);

}  // namespace maga
