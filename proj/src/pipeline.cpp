#include "maga/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include "maga/error.hpp"
#include "maga/rng.hpp"

namespace maga {

namespace {

struct Template {
  const char* domain;
  const char* body;  // {title} placeholder
  const char* additional;
};

constexpr Template kTemplates[] = {
    {"Reddit", "Write just the body of a Reddit post titled \"{title}\".",
     "Do not repeat the title."},
    {"S2ORC", "Write the abstract for the scientific paper titled \"{title}\".",
     "It is preferable not to start with \"This paper\"."},
    {"Wikipedia", "Write the body of a Wikipedia article titled \"{title}\".", ""},
    {"wikiHow", "Write the body of a wikiHow article titled \"{title}\".", ""},
    {"Trustpilot Reviews",
     "Write the body of a Trustpilot review titled \"{title}\".",
     "Do not give it a title."},
    {"Amazon Reviews", "Write the body of an Amazon review titled \"{title}\".",
     "Do not give it a title."},
    {"Yahoo Answers",
     "Write just the response to the question titled \"{title}\" on Yahoo "
     "Answers.",
     "Do not repeat the question."},
    {"Natural Questions", "Provide the answer to the question \"{title}\".", ""},
    {"CC News", "Write the body of a news article titled \"{title}\".",
     "Do not repeat the title."},
    {"NPR News", "Write the body of a NPR news article titled \"{title}\".",
     "Do not repeat the title."},
};

std::string fill(std::string_view body, std::string_view title) {
  std::string out(body);
  const std::string key = "{title}";
  const auto pos = out.find(key);
  if (pos != std::string::npos) out.replace(pos, key.size(), title);
  return out;
}

std::string hex(std::uint64_t v, int digits) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf + 16 - digits);
}

}  // namespace

StageKind parse_stage_kind(std::string_view name) {
  if (name == "prefix") return StageKind::kPrefix;
  if (name == "suffix") return StageKind::kSuffix;
  if (name == "refine") return StageKind::kRefineHook;
  if (name == "rl-policy-swap") return StageKind::kPolicySwap;
  throw ValidationError("unknown stage kind: " + std::string(name));
}

std::string_view to_string(StageKind kind) {
  switch (kind) {
    case StageKind::kPrefix: return "prefix";
    case StageKind::kSuffix: return "suffix";
    case StageKind::kRefineHook: return "refine";
    case StageKind::kPolicySwap: return "rl-policy-swap";
  }
  return "?";
}

void AlignmentStage::validate() const {
  if (!enabled) return;
  if ((kind == StageKind::kPrefix || kind == StageKind::kSuffix ||
       kind == StageKind::kPolicySwap) &&
      payload.empty()) {
    throw ValidationError(std::string(to_string(kind)) +
                          " stage needs a nonempty payload");
  }
}

std::vector<AlignmentStage> stages_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("stages must be a JSON array");
  std::vector<AlignmentStage> out;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("kind")) {
      throw ValidationError("each stage needs a kind");
    }
    AlignmentStage s;
    try {
      s.kind = parse_stage_kind(item["kind"].get<std::string>());
      s.payload = item.value("payload", std::string());
      s.enabled = item.value("enabled", true);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("malformed stage: ") + e.what());
    }
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::json stages_to_json(const std::vector<AlignmentStage>& stages) {
  auto out = nlohmann::json::array();
  for (const auto& s : stages) {
    out.push_back(
        {{"kind", to_string(s.kind)}, {"payload", s.payload}, {"enabled", s.enabled}});
  }
  return out;
}

std::string PromptRecord::user_prompt() const {
  std::string out = base_prompt;
  for (const auto* part : {&suffix, &additional_instruction}) {
    if (part->empty()) continue;
    if (!out.empty()) out += ' ';
    out += *part;
  }
  return out;
}

std::vector<std::string> template_domains() {
  std::vector<std::string> out;
  for (const auto& t : kTemplates) out.emplace_back(t.domain);
  return out;
}

PromptRecord make_prompt(std::string_view domain, std::string_view title) {
  for (const auto& t : kTemplates) {
    if (domain == t.domain) {
      PromptRecord p;
      p.title = title;
      p.domain = domain;
      p.base_prompt = fill(t.body, title);
      p.additional_instruction = t.additional;
      return p;
    }
  }
  throw ValidationError("no prompt template for domain: " + std::string(domain));
}

PromptRecord apply_stages(PromptRecord prompt,
                          const std::vector<AlignmentStage>& stages) {
  if (prompt.staged) throw ValidationError("prompt was already staged");
  int prefixes = 0;
  int suffixes = 0;
  int swaps = 0;
  for (const auto& s : stages) {
    s.validate();
    if (!s.enabled) continue;
    prefixes += s.kind == StageKind::kPrefix;
    suffixes += s.kind == StageKind::kSuffix;
    swaps += s.kind == StageKind::kPolicySwap;
  }
  if (prefixes > 1) throw ValidationError("more than one active prefix stage");
  if (suffixes > 1) throw ValidationError("more than one active suffix stage");
  if (swaps > 1) throw ValidationError("more than one active rl-policy-swap stage");

  for (const auto& s : stages) {
    if (!s.enabled) continue;
    switch (s.kind) {
      case StageKind::kPrefix: prompt.system_prompt = s.payload; break;
      case StageKind::kSuffix: prompt.suffix = s.payload; break;
      case StageKind::kRefineHook: break;
      case StageKind::kPolicySwap: prompt.policy_tag = s.payload; break;
    }
    prompt.stage_log.emplace_back(to_string(s.kind));
  }
  prompt.staged = true;
  return prompt;
}

const std::map<std::string, PolicyFile>& PolicyRegistry::set(
    std::string_view tag) const {
  auto it = sets.find(std::string(tag));
  if (it == sets.end() || it->second.empty()) {
    throw ValidationError("no policies registered under tag: " + std::string(tag));
  }
  return it->second;
}

PolicyRegistry PolicyRegistry::load(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw ValidationError("policy directory not found: " + dir.string());
  }
  PolicyRegistry reg;
  auto load_dir = [](const fs::path& d, std::map<std::string, PolicyFile>& into) {
    for (const auto& e : fs::directory_iterator(d)) {
      if (e.is_regular_file() && e.path().extension() == ".json") {
        into.emplace(e.path().stem().string(), load_policy(e.path()));
      }
    }
  };
  load_dir(dir, reg.sets[std::string(kBaseTag)]);
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) load_dir(e.path(), reg.sets[e.path().filename().string()]);
  }
  return reg;
}

std::string uuid_like(std::string_view key) {
  const auto a = hash_bytes(key, 0x6d61676101ULL);
  const auto b = hash_bytes(key, 0x6d61676102ULL);
  const std::string h = hex(a, 16) + hex(b, 16);
  return h.substr(0, 8) + "-" + h.substr(8, 4) + "-" + h.substr(12, 4) + "-" +
         h.substr(16, 4) + "-" + h.substr(20, 12);
}

std::vector<DocumentRecord> build_variant(
    const std::vector<DocumentRecord>& human_records,
    const PolicyRegistry& registry, const VariantSpec& spec) {
  if (spec.variant_id.empty()) throw ValidationError("variant id must be nonempty");
  if (human_records.empty()) throw ValidationError("no titles to generate for");

  bool refine = false;
  for (const auto& s : spec.stages) {
    s.validate();
    refine = refine || (s.enabled && s.kind == StageKind::kRefineHook);
  }

  std::vector<const DocumentRecord*> humans;
  for (const auto& r : human_records) {
    if (!r.is_human()) {
      throw ValidationError("title file contains a machine record: " + r.id);
    }
    validate_record(r);
    humans.push_back(&r);
  }
  std::sort(humans.begin(), humans.end(),
            [](const auto* a, const auto* b) { return a->title < b->title; });
  for (std::size_t i = 1; i < humans.size(); ++i) {
    if (humans[i]->title == humans[i - 1]->title) {
      throw ValidationError("duplicate human title: " + humans[i]->title);
    }
  }

  // Resolve the policy set once; every policy needs a preset.
  const auto probe = apply_stages(make_prompt(humans.front()->domain, ""), spec.stages);
  const std::string tag =
      probe.policy_tag.empty() ? std::string(PolicyRegistry::kBaseTag) : probe.policy_tag;
  const auto& policies = registry.set(tag);
  std::map<std::string, SamplerConfig> configs;
  for (const auto& [id, file] : policies) {
    SamplerConfig c = find_preset(spec.presets, id).config;
    c.max_length = spec.max_length;
    c.validate();
    configs.emplace(id, c);
  }

  std::vector<DocumentRecord> out;
  out.reserve(humans.size() * (policies.size() + 1));
  for (const auto* h : humans) {
    out.push_back(*h);
    const auto prompt = apply_stages(make_prompt(h->domain, h->title), spec.stages);
    const std::string user = prompt.user_prompt();
    const std::string prompt_id =
        "prompt-" + hex(hash_bytes(prompt.system_prompt + "\x1f" + user), 16);
    for (const auto& [id, file] : policies) {
      const auto& cfg = configs.at(id);
      Context ctx = Context::start();
      auto sym = file.domain_prompts.find(h->domain);
      if (sym != file.domain_prompts.end()) {
        ctx = Context::token(file.vocabulary.id(sym->second));
      }
      const auto trace = sample_sequence(
          file.params, cfg, derive_seed(spec.seed, h->title + "\x1f" + id), ctx);
      DocumentRecord m;
      m.id = uuid_like(spec.variant_id + "\x1f" + h->title + "\x1f" + id);
      m.title = h->title;
      m.text = file.vocabulary.decode(trace.tokens);
      if (refine && spec.refine) m.text = spec.refine(m.text);
      m.domain = h->domain;
      m.human_source_id = h->id;
      m.prompt_id = prompt_id;
      m.system_prompt = prompt.system_prompt;
      m.user_prompt = user;
      m.model = id;
      m.label = kMachineLabel;
      m.temperature = cfg.temperature;
      m.top_p = cfg.top_p;
      m.top_k = cfg.top_k;
      m.repetition_penalty = cfg.repetition_penalty;
      out.push_back(std::move(m));
    }
  }
  return out;
}

}  // namespace maga
