#include "maga/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "maga/error.hpp"
#include "maga/rng.hpp"
#include "maga/text_io.hpp"

namespace maga {
namespace {

using Json = nlohmann::ordered_json;

constexpr std::string_view kStringFields[] = {
    "id",          "title",         "text",        "domain", "human_source_id",
    "prompt_id",   "system_prompt", "user_prompt", "model"};

bool is_schema_key(std::string_view key) {
  for (auto f : kStringFields) {
    if (f == key) return true;
  }
  return key == "label" || key == "temperature" || key == "top_p" ||
         key == "top_k" || key == "repetition_penalty";
}

const Json& require(const Json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw ValidationError(std::string("missing required field: ") + field);
  }
  return *it;
}

std::string get_string(const Json& obj, const char* field) {
  const Json& v = require(obj, field);
  if (!v.is_string()) {
    throw ValidationError(std::string(field) + " must be a string");
  }
  return v.get<std::string>();
}

double get_number(const Json& obj, const char* field) {
  const Json& v = require(obj, field);
  if (!v.is_number()) {
    throw ValidationError(std::string(field) + " must be a number");
  }
  return v.get<double>();
}

int get_integer(const Json& obj, const char* field) {
  const Json& v = require(obj, field);
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d) return static_cast<int>(d);
  }
  throw ValidationError(std::string(field) + " must be an integer");
}

}  // namespace

void validate_record(const DocumentRecord& r) {
  if (r.id.empty()) throw ValidationError("id must be nonempty");
  if (r.label != kHumanLabel && r.label != kMachineLabel) {
    throw ValidationError("label must be 0 or 1");
  }
  if (!(r.temperature > 0.0) || !std::isfinite(r.temperature)) {
    throw ValidationError("temperature must be positive");
  }
  if (!(r.top_p > 0.0 && r.top_p <= 1.0)) {
    throw ValidationError("top_p must be in (0, 1]");
  }
  if (!(r.top_k >= 1 || r.top_k == -1)) {
    throw ValidationError("top_k must be >= 1 or -1");
  }
  if (!(r.repetition_penalty > 0.0) || !std::isfinite(r.repetition_penalty)) {
    throw ValidationError("repetition_penalty must be positive");
  }
  if (r.is_human()) {
    if (!r.model.empty()) {
      throw ValidationError("model must be empty for human records");
    }
    if (r.temperature != 1.0 || r.top_p != 1.0 || r.top_k != -1 ||
        r.repetition_penalty != 1.0) {
      throw ValidationError(
          "decoding fields of human records must carry the defaults "
          "(temperature 1, top_p 1, top_k -1, repetition_penalty 1)");
    }
  } else if (r.model.empty()) {
    throw ValidationError("model must be nonempty for machine records");
  }
}

DocumentRecord parse_record(std::string_view line, ParseMode mode) {
  Json obj;
  try {
    obj = Json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ValidationError("record must be a JSON object");

  DocumentRecord r;
  r.id = get_string(obj, "id");
  r.title = get_string(obj, "title");
  r.text = get_string(obj, "text");
  r.domain = get_string(obj, "domain");
  r.human_source_id = get_string(obj, "human_source_id");
  r.prompt_id = get_string(obj, "prompt_id");
  r.system_prompt = get_string(obj, "system_prompt");
  r.user_prompt = get_string(obj, "user_prompt");
  r.model = get_string(obj, "model");
  r.label = get_integer(obj, "label");
  r.temperature = get_number(obj, "temperature");
  r.top_p = get_number(obj, "top_p");
  r.top_k = get_integer(obj, "top_k");
  r.repetition_penalty = get_number(obj, "repetition_penalty");

  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (is_schema_key(it.key())) continue;
    if (mode == ParseMode::kStrict) {
      throw ValidationError("unknown field: " + it.key());
    }
    r.extra[it.key()] = it.value();
  }
  validate_record(r);
  return r;
}

std::string emit_record(const DocumentRecord& r) {
  Json obj;
  obj["id"] = r.id;
  obj["title"] = r.title;
  obj["text"] = r.text;
  obj["domain"] = r.domain;
  obj["human_source_id"] = r.human_source_id;
  obj["prompt_id"] = r.prompt_id;
  obj["system_prompt"] = r.system_prompt;
  obj["user_prompt"] = r.user_prompt;
  obj["model"] = r.model;
  obj["label"] = r.label;
  obj["temperature"] = r.temperature;
  obj["top_p"] = r.top_p;
  obj["top_k"] = r.top_k;
  obj["repetition_penalty"] = r.repetition_penalty;
  for (auto it = r.extra.begin(); it != r.extra.end(); ++it) {
    obj[it.key()] = it.value();
  }
  return obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

std::vector<DocumentRecord> parse_jsonl(std::string_view content,
                                        ParseMode mode) {
  std::vector<DocumentRecord> out;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    ++line_no;
    const auto line = content.substr(start, end - start);
    start = end + 1;
    if (trim(line).empty()) continue;
    try {
      out.push_back(parse_record(line, mode));
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " +
                            e.what());
    }
  }
  check_unique_ids(out);
  return out;
}

std::vector<DocumentRecord> read_jsonl(const std::filesystem::path& path,
                                       ParseMode mode) {
  return parse_jsonl(read_file(path), mode);
}

std::string emit_jsonl(const std::vector<DocumentRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += emit_record(r);
    out.push_back('\n');
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<DocumentRecord>& records) {
  write_file(path, emit_jsonl(records));
}

void check_unique_ids(const std::vector<DocumentRecord>& records) {
  std::set<std::string_view> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second) {
      throw ValidationError("duplicate id: " + r.id);
    }
  }
}

std::size_t PairedCorpus::machine_count() const {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.machines.size();
  return n;
}

void PairedCorpus::recount() {
  humans_per_domain.clear();
  machines_per_domain_model.clear();
  for (const auto& p : pairs) {
    ++humans_per_domain[p.human.domain];
    for (const auto& m : p.machines) {
      ++machines_per_domain_model[{p.human.domain, m.model}];
    }
  }
}

PairedCorpus pair_by_title(std::vector<DocumentRecord> records) {
  if (records.empty()) throw ValidationError("cannot pair an empty corpus");
  std::map<std::string, TitlePair> by_title;
  for (auto& r : records) {
    if (!r.is_human()) continue;
    auto [it, inserted] = by_title.try_emplace(r.title);
    if (!inserted) throw ValidationError("duplicate human title: " + r.title);
    it->second.human = std::move(r);
  }
  for (auto& r : records) {
    if (r.is_human()) continue;
    auto it = by_title.find(r.title);
    if (it == by_title.end()) {
      throw ValidationError("machine record " + r.id +
                            " has no human record titled: " + r.title);
    }
    it->second.machines.push_back(std::move(r));
  }
  PairedCorpus corpus;
  corpus.pairs.reserve(by_title.size());
  for (auto& [title, pair] : by_title) corpus.pairs.push_back(std::move(pair));
  corpus.recount();
  return corpus;
}

std::vector<DocumentRecord> flatten(const PairedCorpus& corpus) {
  std::vector<DocumentRecord> out;
  for (const auto& p : corpus.pairs) {
    out.push_back(p.human);
    out.insert(out.end(), p.machines.begin(), p.machines.end());
  }
  return out;
}

namespace {

std::string stratum_key(const TitlePair& p, const SplitSpec& spec) {
  std::string key;
  if (spec.stratify_by_domain) key += p.human.domain;
  key.push_back('\x1f');
  if (spec.stratify_by_model) {
    // With fan-out a pair may carry several models; the stratum is the set.
    std::set<std::string> models;
    for (const auto& m : p.machines) models.insert(m.model);
    for (const auto& m : models) {
      key += m;
      key.push_back(',');
    }
  }
  return key;
}

}  // namespace

CorpusSplit split(const PairedCorpus& corpus, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ValidationError("train_fraction must be in (0, 1)");
  }
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    strata[stratum_key(corpus.pairs[i], spec)].push_back(i);
  }
  std::vector<bool> in_train(corpus.pairs.size(), false);
  for (auto& [key, members] : strata) {
    const auto n = members.size();
    const auto n_train = static_cast<std::size_t>(
        std::floor(spec.train_fraction * static_cast<double>(n) + 0.5));
    if (n_train == 0 || n_train == n) {
      throw ValidationError("stratum too small to split (" +
                            std::to_string(n) + " pairs)");
    }
    CounterRng rng(derive_seed(spec.seed, key));
    stable_shuffle(std::span<std::size_t>(members), rng);
    for (std::size_t k = 0; k < n_train; ++k) in_train[members[k]] = true;
  }
  CorpusSplit out;
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    (in_train[i] ? out.train : out.validation).pairs.push_back(corpus.pairs[i]);
  }
  out.train.recount();
  out.validation.recount();
  return out;
}

std::string split_manifest(const CorpusSplit& s) {
  std::string out;
  for (const auto& p : s.train.pairs) out += "train\t" + p.human.title + "\n";
  for (const auto& p : s.validation.pairs) {
    out += "validation\t" + p.human.title + "\n";
  }
  return out;
}

bool BalanceReport::balanced() const {
  if (humans == 0 || collapsed_machines != humans) return false;
  return std::none_of(cells.begin(), cells.end(),
                      [](const BalanceCell& c) { return c.flagged; });
}

std::string BalanceReport::to_csv() const {
  std::string out = "domain,model,human,machine,ratio\n";
  for (const auto& c : cells) {
    out += csv_escape(c.domain) + "," + csv_escape(c.model) + "," +
           std::to_string(c.human) + "," + std::to_string(c.machine) + "," +
           format_fixed(c.ratio, 4) + "\n";
  }
  return out;
}

BalanceReport balance_check(const PairedCorpus& corpus) {
  BalanceReport report;
  std::set<std::string> models;
  for (const auto& [key, n] : corpus.machines_per_domain_model) {
    models.insert(key.second);
  }
  for (const auto& p : corpus.pairs) {
    ++report.humans;
    if (!p.machines.empty()) ++report.collapsed_machines;
  }
  report.overall_ratio =
      report.humans == 0 ? 0.0
                         : static_cast<double>(report.collapsed_machines) /
                               static_cast<double>(report.humans);
  for (const auto& [domain, humans] : corpus.humans_per_domain) {
    for (const auto& model : models) {
      BalanceCell cell;
      cell.domain = domain;
      cell.model = model;
      cell.human = humans;
      auto it = corpus.machines_per_domain_model.find({domain, model});
      cell.machine = it == corpus.machines_per_domain_model.end() ? 0 : it->second;
      cell.ratio = humans == 0 ? 0.0
                               : static_cast<double>(cell.machine) /
                                     static_cast<double>(humans);
      cell.flagged = cell.machine != cell.human;
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

}  // namespace maga
