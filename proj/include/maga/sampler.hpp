#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace maga {

using TokenId = std::size_t;

/// Ordered symbol table. The start and end symbols are always members.
class Vocabulary {
 public:
  static constexpr std::string_view kStart = "<s>";
  static constexpr std::string_view kEnd = "</s>";

  /// Builds {<s>, </s>, words...}; words must be distinct and nonempty.
  static Vocabulary with_words(const std::vector<std::string>& words);
  /// Takes the full symbol list as-is; it must contain <s> and </s>.
  static Vocabulary from_symbols(std::vector<std::string> symbols);

  std::size_t size() const { return symbols_.size(); }
  TokenId start_id() const { return start_; }
  TokenId end_id() const { return end_; }
  const std::string& symbol(TokenId id) const;
  std::optional<TokenId> find(std::string_view symbol) const;
  TokenId id(std::string_view symbol) const;  // throws on unknown
  const std::vector<std::string>& symbols() const { return symbols_; }

  /// Whitespace split, every piece must be a known symbol.
  std::vector<TokenId> encode(std::string_view text) const;
  /// Space-joined symbols, start/end markers dropped.
  std::string decode(std::span<const TokenId> tokens) const;

  bool operator==(const Vocabulary& other) const {
    return symbols_ == other.symbols_;
  }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId start_ = 0;
  TokenId end_ = 0;
};

/// Conditioning state of the order-1 policy: the previous token, or the
/// dedicated start row.
class Context {
 public:
  static Context start() { return Context(true, 0); }
  static Context token(TokenId id) { return Context(false, id); }

  bool is_start() const { return start_; }
  TokenId id() const { return id_; }
  bool operator==(const Context&) const = default;

 private:
  Context(bool start, TokenId id) : start_(start), id_(id) {}
  bool start_;
  TokenId id_;
};

/// Learnable logit table: one row per previous token plus a start row
/// (stored last), V columns.
class PolicyParams {
 public:
  PolicyParams() = default;
  /// Zero table. `end_token` terminates sampled sequences.
  explicit PolicyParams(std::size_t vocab_size, TokenId end_token = 1);

  std::size_t vocab_size() const { return vocab_size_; }
  TokenId end_token() const { return end_token_; }
  std::size_t rows() const { return vocab_size_ + 1; }
  std::size_t row_index(Context ctx) const;  // throws when out of range

  std::span<double> row(Context ctx);
  std::span<const double> row(Context ctx) const;
  double& at(std::size_t row, std::size_t col) {
    return table_[row * vocab_size_ + col];
  }
  double at(std::size_t row, std::size_t col) const {
    return table_[row * vocab_size_ + col];
  }
  std::vector<double>& data() { return table_; }
  const std::vector<double>& data() const { return table_; }

  void check_finite() const;
  bool operator==(const PolicyParams&) const = default;

 private:
  std::size_t vocab_size_ = 0;
  TokenId end_token_ = 1;
  std::vector<double> table_;
};

/// Decoding knobs. presence_penalty and frequency_penalty are the additive
/// alpha and beta weights; repetition_penalty is the divisive theta.
struct SamplerConfig {
  double temperature = 1.0;
  int top_k = -1;  // -1 disables
  double top_p = 1.0;
  double repetition_penalty = 1.0;
  double presence_penalty = 0.0;
  double frequency_penalty = 0.0;
  std::size_t max_length = 16;

  void validate() const;
  /// T = 1, no truncation, no penalties: the raw softmax.
  static SamplerConfig identity(std::size_t max_length = 16);
  bool truncates() const { return top_k != -1 || top_p < 1.0; }
};

struct SampleTrace {
  std::vector<TokenId> tokens;
  std::vector<double> step_logprob;
  std::vector<std::vector<double>> step_distribution;  // when retained
};

std::vector<double> raw_logits(const PolicyParams& params, Context context);

/// Repetition penalty on raw logits, then division by T, then presence and
/// frequency subtraction. Returns temperature-scaled logits.
std::vector<double> apply_penalties(std::span<const double> logits,
                                    std::span<const TokenId> history,
                                    const SamplerConfig& config);

/// Softmax, top-k, top-p, renormalize. Input is already temperature-scaled.
std::vector<double> distribution(std::span<const double> scaled_logits,
                                 const SamplerConfig& config);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

/// Inverse-CDF draw from a probability vector with one uniform.
TokenId draw(std::span<const double> probs, double u);

SampleTrace sample_sequence(const PolicyParams& params,
                            const SamplerConfig& config, std::uint64_t seed,
                            Context prompt = Context::start(),
                            bool keep_distributions = false);

/// Sum of untruncated T = 1 log-probabilities, context chained from
/// `prompt`.
double sequence_logprob(const PolicyParams& params,
                        std::span<const TokenId> sequence,
                        Context prompt = Context::start());

/// KL(old || new) over the full vocabulary at one context.
double step_kl(const PolicyParams& old_policy, const PolicyParams& new_policy,
               Context context);

struct DecodingPreset {
  std::string model;
  SamplerConfig config;
};

/// Per-generator presets of the 12 reference generators; presence and
/// frequency penalties default to 0.
std::vector<DecodingPreset> default_presets();
std::vector<DecodingPreset> parse_presets_csv(std::string_view content);
std::vector<DecodingPreset> load_presets_csv(const std::filesystem::path& path);
/// Header `model,temperature,top_p,top_k,repetition_penalty`.
std::string presets_to_csv(const std::vector<DecodingPreset>& presets);
const DecodingPreset& find_preset(const std::vector<DecodingPreset>& presets,
                                  std::string_view model);

/// Policy file: {"version", "symbols", "rows", "cols", "table",
/// "domain_prompts"}.
struct PolicyFile {
  Vocabulary vocabulary;
  PolicyParams params;
  std::unordered_map<std::string, std::string> domain_prompts;
};
nlohmann::json policy_to_json(const PolicyFile& file);
PolicyFile policy_from_json(const nlohmann::json& j);
void save_policy(const std::filesystem::path& path, const PolicyFile& file);
PolicyFile load_policy(const std::filesystem::path& path);

}  // namespace maga
