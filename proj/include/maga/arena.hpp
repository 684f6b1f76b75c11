#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "maga/corpus.hpp"
#include "maga/detector.hpp"
#include "maga/rldf.hpp"
#include "maga/sampler.hpp"

namespace maga {

/// Two-dialect toy world. Human and machine texts share per-domain content
/// words and differ in their function words; machine texts also open with
/// a domain-specific marker.
struct ArenaSpec {
  std::size_t titles_per_domain = 40;
  std::size_t max_length = 12;
  double model_noise = 0.15;  // std-dev of per-model logit jitter
  std::uint64_t seed = 7;
};

nlohmann::json arena_spec_to_json(const ArenaSpec& spec);
ArenaSpec arena_spec_from_json(const nlohmann::json& j);

struct Arena {
  RldfWorld world;
  PolicyParams human_policy;
  std::map<std::string, PolicyParams> policies;

  /// Policy file for one generator, carrying the domain prompt symbols.
  PolicyFile policy_file(const std::string& id) const;
};

namespace arena {
inline const std::vector<std::string> kDomainsA{"Wikipedia", "wikiHow"};
inline const std::vector<std::string> kDomainsB{"Reddit", "Amazon Reviews"};
inline const std::vector<std::string> kModelsA{"Qwen3-8B", "Hunyuan-7B-Instruct"};
inline const std::vector<std::string> kModelsB{"Llama-3.1-8B-Instruct",
                                               "Ministral-8B-Instruct-2410"};
inline const std::vector<std::string> kHumanMarkers{"the", "of", "and", "to"};
inline const std::vector<std::string> kMachineMarkers{"moreover", "furthermore",
                                                      "additionally", "overall"};
/// Unseen marker sets for the shifted held-out corpus.
inline const std::vector<std::string> kShiftedHumanMarkers{"a", "in", "with", "for"};
inline const std::vector<std::string> kShiftedMachineMarkers{"thus", "hence",
                                                             "notably", "indeed"};

std::vector<std::string> content_words(const std::string& domain);
std::string opener_word(const std::string& domain);
std::string prompt_symbol(const std::string& domain);
}  // namespace arena

Arena make_arena(const ArenaSpec& spec = {});

/// Paired corpus of `per_class` human and `per_class` machine texts built
/// from disjoint marker sets. `shifted` swaps both classes to the unseen
/// marker sets.
std::vector<DocumentRecord> separable_corpus(std::size_t per_class,
                                             std::uint64_t seed,
                                             bool shifted = false);

/// Large-step detector training that drives in-distribution scores to
/// exactly 0 or 1 in double precision.
TrainHyper saturating_hyper();

}  // namespace maga
