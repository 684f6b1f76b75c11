#include "maga/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "maga/error.hpp"
#include "maga/rng.hpp"
#include "maga/text_io.hpp"

namespace maga {

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary Vocabulary::with_words(const std::vector<std::string>& words) {
  std::vector<std::string> symbols{std::string(kStart), std::string(kEnd)};
  symbols.insert(symbols.end(), words.begin(), words.end());
  return from_symbols(std::move(symbols));
}

Vocabulary Vocabulary::from_symbols(std::vector<std::string> symbols) {
  Vocabulary v;
  for (TokenId i = 0; i < symbols.size(); ++i) {
    const auto& s = symbols[i];
    if (s.empty() || s.find_first_of(" \t\n\r") != std::string::npos) {
      throw ValidationError("vocabulary symbol must be nonempty without "
                            "whitespace: '" + s + "'");
    }
    if (!v.index_.emplace(s, i).second) {
      throw ValidationError("duplicate vocabulary symbol: " + s);
    }
  }
  auto start = v.index_.find(std::string(kStart));
  auto end = v.index_.find(std::string(kEnd));
  if (start == v.index_.end() || end == v.index_.end()) {
    throw ValidationError("vocabulary must contain <s> and </s>");
  }
  if (symbols.size() < 2) throw ValidationError("vocabulary size must be >= 2");
  v.start_ = start->second;
  v.end_ = end->second;
  v.symbols_ = std::move(symbols);
  return v;
}

const std::string& Vocabulary::symbol(TokenId id) const {
  if (id >= symbols_.size()) {
    throw ValidationError("token id out of range: " + std::to_string(id));
  }
  return symbols_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view symbol) const {
  auto found = find(symbol);
  if (!found) throw ValidationError("unknown token: " + std::string(symbol));
  return *found;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> out;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) out.push_back(id(word));
  return out;
}

std::string Vocabulary::decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (TokenId t : tokens) {
    if (t == start_ || t == end_) continue;
    if (!out.empty()) out.push_back(' ');
    out += symbol(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PolicyParams

PolicyParams::PolicyParams(std::size_t vocab_size, TokenId end_token)
    : vocab_size_(vocab_size),
      end_token_(end_token),
      table_((vocab_size + 1) * vocab_size, 0.0) {
  if (vocab_size < 2) throw ValidationError("vocabulary size must be >= 2");
  if (end_token >= vocab_size) throw ValidationError("end token out of range");
}

std::size_t PolicyParams::row_index(Context ctx) const {
  if (ctx.is_start()) return vocab_size_;
  if (ctx.id() >= vocab_size_) {
    throw ValidationError("context index out of range: " +
                          std::to_string(ctx.id()));
  }
  return ctx.id();
}

std::span<double> PolicyParams::row(Context ctx) {
  return {table_.data() + row_index(ctx) * vocab_size_, vocab_size_};
}

std::span<const double> PolicyParams::row(Context ctx) const {
  return {table_.data() + row_index(ctx) * vocab_size_, vocab_size_};
}

void PolicyParams::check_finite() const {
  for (std::size_t i = 0; i < table_.size(); ++i) {
    if (!std::isfinite(table_[i])) {
      throw ValidationError("non-finite logit at row " +
                            std::to_string(i / vocab_size_) + ", column " +
                            std::to_string(i % vocab_size_));
    }
  }
}

// ---------------------------------------------------------------------------
// SamplerConfig

void SamplerConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ValidationError("temperature must be positive");
  }
  if (!(top_k >= 1 || top_k == -1)) {
    throw ValidationError("top_k must be >= 1 or -1");
  }
  if (!(top_p > 0.0 && top_p <= 1.0)) {
    throw ValidationError("top_p must be in (0, 1]");
  }
  if (!(repetition_penalty >= 1.0)) {
    throw ValidationError("repetition_penalty must be >= 1");
  }
  if (!(presence_penalty >= 0.0)) {
    throw ValidationError("presence_penalty must be >= 0");
  }
  if (!(frequency_penalty >= 0.0)) {
    throw ValidationError("frequency_penalty must be >= 0");
  }
  if (max_length < 1) throw ValidationError("max_length must be >= 1");
}

SamplerConfig SamplerConfig::identity(std::size_t max_length) {
  SamplerConfig c;
  c.max_length = max_length;
  return c;
}

// ---------------------------------------------------------------------------
// Decoding pipeline

std::vector<double> raw_logits(const PolicyParams& params, Context context) {
  auto row = params.row(context);
  return {row.begin(), row.end()};
}

std::vector<double> apply_penalties(std::span<const double> logits,
                                    std::span<const TokenId> history,
                                    const SamplerConfig& config) {
  std::vector<std::size_t> counts(logits.size(), 0);
  for (TokenId t : history) {
    if (t < counts.size()) ++counts[t];
  }
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) {
      throw ValidationError("logit " + std::to_string(i) + " is not finite");
    }
    double x = logits[i];
    if (counts[i] > 0) x /= config.repetition_penalty;
    x /= config.temperature;
    if (counts[i] > 0) {
      x -= config.presence_penalty;
      x -= config.frequency_penalty * static_cast<double>(counts[i]);
    }
    out[i] = x;
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(mx)) throw ValidationError("softmax over empty support");
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double x : logits) z += std::exp(x - mx);
  const double lz = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lz;
  return out;
}

std::vector<double> distribution(std::span<const double> scaled_logits,
                                 const SamplerConfig& config) {
  std::vector<double> p = softmax(scaled_logits);
  if (!config.truncates()) return p;

  const std::size_t n = p.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });

  std::size_t keep = n;
  if (config.top_k != -1) keep = std::min<std::size_t>(keep, config.top_k);

  if (config.top_p < 1.0) {
    double kept_mass = 0.0;
    for (std::size_t r = 0; r < keep; ++r) kept_mass += p[order[r]];
    double cumulative = 0.0;
    std::size_t nucleus = 0;
    while (nucleus < keep) {
      cumulative += p[order[nucleus]] / kept_mass;
      ++nucleus;
      if (cumulative >= config.top_p) break;
    }
    keep = nucleus;
  }

  double mass = 0.0;
  for (std::size_t r = 0; r < keep; ++r) mass += p[order[r]];
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < keep; ++r) out[order[r]] = p[order[r]] / mass;
  return out;
}

TokenId draw(std::span<const double> probs, double u) {
  double cumulative = 0.0;
  TokenId last = 0;
  for (TokenId i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cumulative += probs[i];
    last = i;
    if (u < cumulative) return i;
  }
  return last;
}

SampleTrace sample_sequence(const PolicyParams& params,
                            const SamplerConfig& config, std::uint64_t seed,
                            Context prompt, bool keep_distributions) {
  config.validate();
  CounterRng rng(seed);
  SampleTrace trace;
  Context ctx = prompt;
  for (std::size_t step = 0; step < config.max_length; ++step) {
    const auto scaled =
        apply_penalties(params.row(ctx), trace.tokens, config);
    auto dist = distribution(scaled, config);
    const TokenId tok = draw(dist, rng.uniform());
    trace.tokens.push_back(tok);
    trace.step_logprob.push_back(std::log(dist[tok]));
    if (keep_distributions) trace.step_distribution.push_back(std::move(dist));
    if (tok == params.end_token()) break;
    ctx = Context::token(tok);
  }
  return trace;
}

double sequence_logprob(const PolicyParams& params,
                        std::span<const TokenId> sequence, Context prompt) {
  double total = 0.0;
  Context ctx = prompt;
  for (TokenId tok : sequence) {
    if (tok >= params.vocab_size()) {
      throw ValidationError("token out of vocabulary: " + std::to_string(tok));
    }
    total += log_softmax(params.row(ctx))[tok];
    ctx = Context::token(tok);
  }
  return total;
}

double step_kl(const PolicyParams& old_policy, const PolicyParams& new_policy,
               Context context) {
  if (old_policy.vocab_size() != new_policy.vocab_size()) {
    throw ValidationError("policies have different vocabulary sizes");
  }
  const auto lp_old = log_softmax(old_policy.row(context));
  const auto lp_new = log_softmax(new_policy.row(context));
  double kl = 0.0;
  for (std::size_t i = 0; i < lp_old.size(); ++i) {
    kl += std::exp(lp_old[i]) * (lp_old[i] - lp_new[i]);
  }
  return std::max(kl, 0.0);
}

// ---------------------------------------------------------------------------
// Presets

namespace {

DecodingPreset preset(const char* model, double t, double p, int k,
                      double rep) {
  DecodingPreset d;
  d.model = model;
  d.config.temperature = t;
  d.config.top_p = p;
  d.config.top_k = k;
  d.config.repetition_penalty = rep;
  return d;
}

}  // namespace

std::vector<DecodingPreset> default_presets() {
  return {
      preset("GPT-4o-mini", 0.6, 1, -1, 1),
      preset("Gemini-2.0-flash", 1, 1, -1, 1),
      preset("DeepSeek-V3", 1, 1, -1, 1),
      preset("Qwen3-plus", 0.7, 0.8, -1, 1),
      preset("Mistral-Medium", 1, 1, -1, 1),
      preset("Hunyuan-TurboS", 1, 1, -1, 1),
      preset("Llama-3.1-8B-Instruct", 0.6, 0.9, -1, 1),
      preset("gemma-3-12b-it", 1, 0.95, 64, 1),
      preset("DeepSeek-R1-0528-Qwen3-8B", 0.6, 0.95, -1, 1),
      preset("Qwen3-8B", 0.6, 0.95, 20, 1),
      preset("Ministral-8B-Instruct-2410", 1, 1, -1, 1),
      preset("Hunyuan-7B-Instruct", 0.7, 0.8, 20, 1.05),
  };
}

std::vector<DecodingPreset> parse_presets_csv(std::string_view content) {
  const auto rows = parse_csv(content);
  if (rows.empty()) throw ValidationError("empty preset file");
  const std::vector<std::string> header{"model", "temperature", "top_p",
                                        "top_k", "repetition_penalty"};
  if (rows.front() != header) {
    throw ValidationError(
        "preset header must be model,temperature,top_p,top_k,"
        "repetition_penalty");
  }
  std::vector<DecodingPreset> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw ValidationError("preset row " + std::to_string(r) +
                            " has wrong column count");
    }
    DecodingPreset d;
    d.model = row[0];
    try {
      d.config.temperature = std::stod(row[1]);
      d.config.top_p = std::stod(row[2]);
      d.config.top_k = std::stoi(row[3]);
      d.config.repetition_penalty = std::stod(row[4]);
    } catch (const std::exception&) {
      throw ValidationError("preset row " + std::to_string(r) +
                            " has a non-numeric field");
    }
    d.config.validate();
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<DecodingPreset> load_presets_csv(
    const std::filesystem::path& path) {
  return parse_presets_csv(read_file(path));
}

std::string presets_to_csv(const std::vector<DecodingPreset>& presets) {
  std::string out = "model,temperature,top_p,top_k,repetition_penalty\n";
  for (const auto& p : presets) {
    out += csv_escape(p.model) + "," + format_double(p.config.temperature) +
           "," + format_double(p.config.top_p) + "," +
           std::to_string(p.config.top_k) + "," +
           format_double(p.config.repetition_penalty) + "\n";
  }
  return out;
}

const DecodingPreset& find_preset(const std::vector<DecodingPreset>& presets,
                                  std::string_view model) {
  for (const auto& p : presets) {
    if (p.model == model) return p;
  }
  throw ValidationError("missing decoding preset for model: " +
                        std::string(model));
}

// ---------------------------------------------------------------------------
// Policy files

nlohmann::json policy_to_json(const PolicyFile& file) {
  nlohmann::json j;
  j["version"] = 1;
  j["symbols"] = file.vocabulary.symbols();
  j["rows"] = file.params.rows();
  j["cols"] = file.params.vocab_size();
  j["table"] = file.params.data();
  nlohmann::json prompts = nlohmann::json::object();
  for (const auto& [domain, sym] : file.domain_prompts) prompts[domain] = sym;
  j["domain_prompts"] = prompts;
  return j;
}

PolicyFile policy_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) {
      throw ValidationError("unsupported policy file version");
    }
    PolicyFile f;
    f.vocabulary =
        Vocabulary::from_symbols(j.at("symbols").get<std::vector<std::string>>());
    const auto cols = j.at("cols").get<std::size_t>();
    if (cols != f.vocabulary.size() || j.at("rows").get<std::size_t>() != cols + 1) {
      throw ValidationError("policy table shape does not match vocabulary");
    }
    f.params = PolicyParams(cols, f.vocabulary.end_id());
    auto table = j.at("table").get<std::vector<double>>();
    if (table.size() != f.params.data().size()) {
      throw ValidationError("policy table has wrong number of entries");
    }
    f.params.data() = std::move(table);
    f.params.check_finite();
    if (j.contains("domain_prompts")) {
      for (auto it = j["domain_prompts"].begin(); it != j["domain_prompts"].end();
           ++it) {
        const auto sym = it.value().get<std::string>();
        f.vocabulary.id(sym);
        f.domain_prompts[it.key()] = sym;
      }
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed policy file: ") + e.what());
  }
}

void save_policy(const std::filesystem::path& path, const PolicyFile& file) {
  write_file(path, policy_to_json(file).dump() + "\n");
}

PolicyFile load_policy(const std::filesystem::path& path) {
  try {
    return policy_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace maga
