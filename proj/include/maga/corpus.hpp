#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace maga {

inline constexpr int kHumanLabel = 0;
inline constexpr int kMachineLabel = 1;

/// One human or machine text with its generation provenance. Field names
/// and types follow the dataset annotation schema; human records carry the
/// inert decoding defaults (1, 1, -1, 1).
struct DocumentRecord {
  std::string id;
  std::string title;
  std::string text;
  std::string domain;
  std::string human_source_id;
  std::string prompt_id;
  std::string system_prompt;
  std::string user_prompt;
  std::string model;
  int label = kHumanLabel;
  double temperature = 1.0;
  double top_p = 1.0;
  int top_k = -1;
  double repetition_penalty = 1.0;
  // Unknown keys, kept only when parsing in preserve mode.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool is_human() const { return label == kHumanLabel; }
};

enum class ParseMode {
  kStrict,    // unknown keys are an error
  kPreserve,  // unknown keys are kept in `extra` and re-emitted
};

/// Throws ValidationError naming the offending field.
void validate_record(const DocumentRecord& record);

DocumentRecord parse_record(std::string_view line,
                            ParseMode mode = ParseMode::kStrict);

/// Single-line JSON, schema key order, extras appended.
std::string emit_record(const DocumentRecord& record);

std::vector<DocumentRecord> parse_jsonl(std::string_view content,
                                        ParseMode mode = ParseMode::kStrict);
std::vector<DocumentRecord> read_jsonl(const std::filesystem::path& path,
                                       ParseMode mode = ParseMode::kStrict);
std::string emit_jsonl(const std::vector<DocumentRecord>& records);
void write_jsonl(const std::filesystem::path& path,
                 const std::vector<DocumentRecord>& records);

/// Rejects duplicate ids within one corpus file.
void check_unique_ids(const std::vector<DocumentRecord>& records);

struct TitlePair {
  DocumentRecord human;
  std::vector<DocumentRecord> machines;
};

struct PairedCorpus {
  std::vector<TitlePair> pairs;  // ordered by title
  std::map<std::string, std::size_t> humans_per_domain;
  std::map<std::pair<std::string, std::string>, std::size_t>
      machines_per_domain_model;

  std::size_t machine_count() const;
  bool empty() const { return pairs.empty(); }
  /// Recomputes the count maps from `pairs`.
  void recount();
};

/// Attaches every machine record to the human record with the same title.
PairedCorpus pair_by_title(std::vector<DocumentRecord> records);

/// Inverse of pair_by_title: human record first, then its machines.
std::vector<DocumentRecord> flatten(const PairedCorpus& corpus);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  bool stratify_by_domain = false;
  bool stratify_by_model = false;
};

struct CorpusSplit {
  PairedCorpus train;
  PairedCorpus validation;
};

/// Title-disjoint, seeded split. Each stratum contributes
/// round(train_fraction * n) pairs to train.
CorpusSplit split(const PairedCorpus& corpus, const SplitSpec& spec);

/// One title per line, prefixed "train\t" or "validation\t".
std::string split_manifest(const CorpusSplit& split);

struct BalanceCell {
  std::string domain;
  std::string model;
  std::size_t human = 0;
  std::size_t machine = 0;
  double ratio = 0.0;  // machine / human
  bool flagged = false;
};

struct BalanceReport {
  std::size_t humans = 0;
  /// Titles with at least one machine text (fan-out collapsed to one).
  std::size_t collapsed_machines = 0;
  double overall_ratio = 0.0;
  std::vector<BalanceCell> cells;  // rows = domains, columns = models

  bool balanced() const;
  /// Header `domain,model,human,machine,ratio`.
  std::string to_csv() const;
};

BalanceReport balance_check(const PairedCorpus& corpus);

}  // namespace maga
