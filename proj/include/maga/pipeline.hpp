#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "maga/corpus.hpp"
#include "maga/sampler.hpp"

namespace maga {

enum class StageKind { kPrefix, kSuffix, kRefineHook, kPolicySwap };

StageKind parse_stage_kind(std::string_view name);  // prefix|suffix|refine|rl-policy-swap
std::string_view to_string(StageKind kind);

struct AlignmentStage {
  StageKind kind = StageKind::kPrefix;
  std::string payload;  // prompt text, refine note, or policy tag
  bool enabled = true;

  void validate() const;
};

std::vector<AlignmentStage> stages_from_json(const nlohmann::json& j);
nlohmann::json stages_to_json(const std::vector<AlignmentStage>& stages);

struct PromptRecord {
  std::string title;
  std::string domain;
  std::string base_prompt;             // template with the title filled in
  std::string additional_instruction;  // re-appended after any suffix
  std::string suffix;
  std::string system_prompt;
  std::string policy_tag;  // empty = base policies
  std::vector<std::string> stage_log;
  bool staged = false;

  /// base, suffix, additional instruction, space-joined, empties skipped.
  std::string user_prompt() const;
};

/// Domains with a generation template.
std::vector<std::string> template_domains();

/// Throws ValidationError for a domain without a template.
PromptRecord make_prompt(std::string_view domain, std::string_view title);

/// Applies enabled stages in order. At most one prefix and one suffix may
/// be enabled; a record that was already staged is rejected.
PromptRecord apply_stages(PromptRecord prompt,
                          const std::vector<AlignmentStage>& stages);

/// Policy sets keyed by tag, then by policy id. The untagged set is "base".
struct PolicyRegistry {
  static constexpr std::string_view kBaseTag = "base";
  std::map<std::string, std::map<std::string, PolicyFile>> sets;

  const std::map<std::string, PolicyFile>& set(std::string_view tag) const;
  /// Files directly under `dir` form "base"; each subdirectory forms a tag.
  static PolicyRegistry load(const std::filesystem::path& dir);
};

using TextTransform = std::function<std::string(std::string_view)>;

struct VariantSpec {
  std::string variant_id;
  std::vector<AlignmentStage> stages;
  std::vector<DecodingPreset> presets;
  std::uint64_t seed = 0;
  std::size_t max_length = 12;
  TextTransform refine;  // applied to machine text when a refine stage is on
};

/// Human record of each title followed by one machine record per policy,
/// ordered by title then policy id. Generation seeds depend on the run seed,
/// title and policy only, so variants built from the same titles share them.
std::vector<DocumentRecord> build_variant(
    const std::vector<DocumentRecord>& human_records,
    const PolicyRegistry& registry, const VariantSpec& spec);

/// 8-4-4-4-12 hex id derived from `key`.
std::string uuid_like(std::string_view key);

}  // namespace maga
