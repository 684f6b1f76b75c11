#include "maga/arena.hpp"

#include <algorithm>
#include <cmath>

#include "maga/error.hpp"
#include "maga/rng.hpp"

namespace maga {

namespace arena {

std::vector<std::string> content_words(const std::string& domain) {
  if (domain == "Wikipedia") return {"history", "region", "century", "population"};
  if (domain == "wikiHow") return {"step", "tool", "method", "tip"};
  if (domain == "Reddit") return {"thread", "upvote", "lol", "friend"};
  if (domain == "Amazon Reviews") return {"product", "price", "quality", "delivery"};
  throw ValidationError("domain not in the arena: " + domain);
}

std::string opener_word(const std::string& domain) {
  if (domain == "Wikipedia") return "encyclopedic";
  if (domain == "wikiHow") return "certainly";
  if (domain == "Reddit") return "absolutely";
  if (domain == "Amazon Reviews") return "delightful";
  throw ValidationError("domain not in the arena: " + domain);
}

std::string prompt_symbol(const std::string& domain) {
  std::string s = "<" + domain + ">";
  std::replace(s.begin(), s.end(), ' ', '_');
  return s;
}

}  // namespace arena

namespace {

constexpr double kFloor = -20.0;

std::vector<std::string> all_domains() {
  std::vector<std::string> out = arena::kDomainsA;
  out.insert(out.end(), arena::kDomainsB.begin(), arena::kDomainsB.end());
  return out;
}

Vocabulary arena_vocabulary() {
  std::vector<std::string> words;
  for (const auto& d : all_domains()) words.push_back(arena::prompt_symbol(d));
  for (const auto& d : all_domains()) words.push_back(arena::opener_word(d));
  for (const auto& d : all_domains()) {
    for (auto& w : arena::content_words(d)) words.push_back(std::move(w));
  }
  for (const auto& w : arena::kHumanMarkers) words.push_back(w);
  for (const auto& w : arena::kMachineMarkers) words.push_back(w);
  return Vocabulary::with_words(words);
}

using Mass = std::vector<std::pair<std::vector<TokenId>, double>>;

// Fills a row with log-probabilities: each group shares its mass evenly,
// everything else sits at `floor`.
void set_row(PolicyParams& p, Context ctx, const Mass& mass,
             double floor = kFloor) {
  auto row = p.row(ctx);
  std::fill(row.begin(), row.end(), floor);
  for (const auto& [ids, total] : mass) {
    for (TokenId id : ids) {
      row[id] = std::log(total / static_cast<double>(ids.size()));
    }
  }
}

struct Ids {
  std::map<std::string, TokenId> prompt, opener;
  std::map<std::string, std::vector<TokenId>> content;
  std::vector<TokenId> all_content, human, machine;
  TokenId end = 1;
};

Ids collect_ids(const Vocabulary& v) {
  Ids ids;
  ids.end = v.end_id();
  for (const auto& d : all_domains()) {
    ids.prompt[d] = v.id(arena::prompt_symbol(d));
    ids.opener[d] = v.id(arena::opener_word(d));
    for (const auto& w : arena::content_words(d)) {
      ids.content[d].push_back(v.id(w));
      ids.all_content.push_back(v.id(w));
    }
  }
  for (const auto& w : arena::kHumanMarkers) ids.human.push_back(v.id(w));
  for (const auto& w : arena::kMachineMarkers) ids.machine.push_back(v.id(w));
  return ids;
}

PolicyParams human_reference(const Vocabulary& v, const Ids& ids) {
  PolicyParams p(v.size(), v.end_id());
  for (std::size_t r = 0; r < v.size(); ++r) {
    set_row(p, Context::token(r), {{ids.all_content, 1.0}});
  }
  set_row(p, Context::start(), {{ids.all_content, 1.0}});
  for (const auto& d : all_domains()) {
    set_row(p, Context::token(ids.prompt.at(d)), {{ids.content.at(d), 1.0}});
    for (TokenId c : ids.content.at(d)) {
      set_row(p, Context::token(c),
              {{ids.human, 0.8}, {{ids.end}, 0.2}});
    }
  }
  for (TokenId m : ids.human) {
    set_row(p, Context::token(m), {{ids.all_content, 0.9}, {{ids.end}, 0.1}});
  }
  return p;
}

PolicyParams machine_policy(const Vocabulary& v, const Ids& ids,
                            const std::string& model, const ArenaSpec& spec) {
  PolicyParams p(v.size(), v.end_id());
  for (std::size_t r = 0; r < v.size(); ++r) {
    set_row(p, Context::token(r), {{ids.all_content, 0.9}, {{ids.end}, 0.1}});
  }
  set_row(p, Context::start(), {{ids.all_content, 1.0}});
  for (const auto& d : all_domains()) {
    set_row(p, Context::token(ids.prompt.at(d)), {{{ids.opener.at(d)}, 1.0}}, -40.0);
    set_row(p, Context::token(ids.opener.at(d)), {{ids.content.at(d), 1.0}});
    for (TokenId c : ids.content.at(d)) {
      set_row(p, Context::token(c),
              {{ids.machine, 0.8}, {{ids.end}, 0.2}});
    }
  }
  CounterRng rng(derive_seed(spec.seed, "model\x1f" + model));
  for (auto& x : p.data()) x += spec.model_noise * rng.normal();
  return p;
}

std::string slug(const std::string& domain) {
  std::string s;
  for (char c : domain) {
    if (c == ' ') {
      s += '-';
    } else {
      s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return s;
}

std::string padded(std::size_t i, std::size_t width) {
  std::string s = std::to_string(i);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

}  // namespace

nlohmann::json arena_spec_to_json(const ArenaSpec& s) {
  return {{"titles_per_domain", s.titles_per_domain},
          {"max_length", s.max_length},
          {"model_noise", s.model_noise},
          {"seed", s.seed}};
}

ArenaSpec arena_spec_from_json(const nlohmann::json& j) {
  ArenaSpec s;
  try {
    s.titles_per_domain = j.value("titles_per_domain", s.titles_per_domain);
    s.max_length = j.value("max_length", s.max_length);
    s.model_noise = j.value("model_noise", s.model_noise);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed arena spec: ") + e.what());
  }
  if (s.titles_per_domain < 2) {
    throw ValidationError("titles_per_domain must be >= 2");
  }
  if (s.max_length < 1) throw ValidationError("max_length must be >= 1");
  if (!(s.model_noise >= 0.0)) throw ValidationError("model_noise must be >= 0");
  return s;
}

PolicyFile Arena::policy_file(const std::string& id) const {
  auto it = policies.find(id);
  if (it == policies.end()) throw ValidationError("unknown policy: " + id);
  PolicyFile f{world.vocabulary, it->second, {}};
  for (const auto& [domain, ctx] : world.domain_prompts) {
    f.domain_prompts[domain] = world.vocabulary.symbol(ctx.id());
  }
  return f;
}

Arena make_arena(const ArenaSpec& spec) {
  Arena a;
  a.world.vocabulary = arena_vocabulary();
  const auto ids = collect_ids(a.world.vocabulary);
  for (const auto& d : all_domains()) {
    a.world.domain_prompts.emplace(d, Context::token(ids.prompt.at(d)));
  }
  auto& g = a.world.assignment;
  g.domains_a = {arena::kDomainsA.begin(), arena::kDomainsA.end()};
  g.domains_b = {arena::kDomainsB.begin(), arena::kDomainsB.end()};
  g.models_a = {arena::kModelsA.begin(), arena::kModelsA.end()};
  g.models_b = {arena::kModelsB.begin(), arena::kModelsB.end()};

  a.human_policy = human_reference(a.world.vocabulary, ids);
  for (const auto& group : {arena::kModelsA, arena::kModelsB}) {
    for (const auto& m : group) {
      a.policies.emplace(m, machine_policy(a.world.vocabulary, ids, m, spec));
    }
  }

  const auto sampler = SamplerConfig::identity(spec.max_length);
  for (const auto& d : all_domains()) {
    for (std::size_t i = 0; i < spec.titles_per_domain; ++i) {
      const auto num = padded(i, 3);
      DocumentRecord r;
      r.id = "human-" + slug(d) + "-" + num;
      r.title = d + " topic " + num;
      r.domain = d;
      for (std::uint64_t attempt = 0; r.text.empty(); ++attempt) {
        const auto trace = sample_sequence(
            a.human_policy, sampler,
            derive_seed(derive_seed(spec.seed, r.title), attempt),
            a.world.domain_prompts.at(d));
        r.text = a.world.vocabulary.decode(trace.tokens);
      }
      a.world.human_records.push_back(std::move(r));
    }
  }
  return a;
}

std::vector<DocumentRecord> separable_corpus(std::size_t per_class,
                                             std::uint64_t seed, bool shifted) {
  if (per_class == 0) throw ValidationError("per_class must be >= 1");
  const auto& human = shifted ? arena::kShiftedHumanMarkers : arena::kHumanMarkers;
  const auto& machine =
      shifted ? arena::kShiftedMachineMarkers : arena::kMachineMarkers;
  const auto domains = all_domains();
  CounterRng rng(derive_seed(seed, shifted ? "shifted" : "separable"));

  auto text_from = [&](const std::string& domain,
                       const std::vector<std::string>& markers) {
    const auto words = arena::content_words(domain);
    const std::size_t n = 2 + rng.below(4);  // content words
    std::string t;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) t += " " + markers[rng.below(markers.size())] + " ";
      t += words[rng.below(words.size())];
    }
    return t;
  };

  std::vector<DocumentRecord> out;
  const std::string tag = shifted ? "shifted" : "sep";
  for (std::size_t i = 0; i < per_class; ++i) {
    const auto& d = domains[i % domains.size()];
    const auto num = padded(i, 5);
    DocumentRecord h;
    h.id = tag + "-h-" + num;
    h.title = tag + " title " + num;
    h.domain = d;
    h.text = text_from(d, human);
    DocumentRecord m;
    m.id = tag + "-m-" + num;
    m.title = h.title;
    m.domain = d;
    m.human_source_id = h.id;
    m.model = arena::kModelsA[i % arena::kModelsA.size()];
    m.label = kMachineLabel;
    m.text = text_from(d, machine);
    out.push_back(std::move(h));
    out.push_back(std::move(m));
  }
  return out;
}

TrainHyper saturating_hyper() {
  TrainHyper h;
  h.epochs = 20;
  h.batch_size = 64;
  h.learning_rate = 1e5;
  h.l2 = 0.0;
  return h;
}

}  // namespace maga
