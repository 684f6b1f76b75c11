#include "maga/textstats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "maga/error.hpp"
#include "maga/text_io.hpp"

namespace maga {
namespace {

// A few hundred of the most common short English words. Stand-in for the
// full 3000-word familiar list, which can be loaded from a file instead.
constexpr std::string_view kBundledEasyWords = R"(
a about above across act add after again against ago air all almost alone
along already also always am among an and animal another answer any anyone
anything are area arm around as ask at away baby back bad bag ball bank be
bear beautiful because bed been before began begin behind being believe bell
below best better between big bird black blue boat body book both box boy
bread break bring brother brown build busy but buy by call came can car care
carry cat catch cause change child children city class clean clear close cold
color come cook cool could country course cow cry cup cut dad dark day dear
did die different dinner do does dog done door down draw dream dress drink
drive dry during each ear early earth easy eat egg end enough even evening
ever every eye face fall family far farm fast father feel feet few field find
fine fire first fish five floor fly follow food foot for found four free
friend from front full fun game garden gave get girl give glad go good got
grass great green ground grow had hair half hand happy hard has hat have he
head hear heard help her here high hill him his hold home hope horse hot
house how hundred i idea if in inside into is it its job jump just keep kind
king knew know lady land large last late laugh learn leave left leg let
letter life light like line list little live long look lost lot love low made
make man many may me mean men might milk mind miss money month more morning
most mother mouth move much must my name near need never new next nice night
no nothing now number of off often old on once one only open or other our out
over own page paper part party pass people pick picture place plant play
please point poor pretty pull put question quick quiet rain ran read ready
real red remember rest ride right river road rock room run sad said same sat
saw say school sea second see seem sell send set she ship shoe short should
show side sing sister sit six sleep small snow so some something song soon
sound speak stand start stay step still stop story street strong such sun
sure table take talk tall tell ten than thank that the their them then there
these they thing think this those thought three through time to today
together told too took top toward town tree true try turn two under until up
upon us use very voice wait walk want warm was wash watch water way we week
well went were what when where which while white who why will wind window
wish with without woman wood word work world would write year yes yet you
young your
)";

std::vector<std::string> stat_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      continue;
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::vector<std::string> ngrams(std::span<const std::string> tokens, int n) {
  std::vector<std::string> out;
  const auto order = static_cast<std::size_t>(n);
  if (n < 1 || tokens.size() < order) return out;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    std::string g = tokens[i];
    for (std::size_t k = 1; k < order; ++k) {
      g.push_back('\x1f');
      g += tokens[i + k];
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::map<std::string, std::size_t> ngram_counts(
    std::span<const std::string> tokens, int n) {
  std::map<std::string, std::size_t> counts;
  for (auto& g : ngrams(tokens, n)) ++counts[g];
  return counts;
}

std::size_t clipped_matches(std::span<const std::string> candidate,
                            std::span<const std::string> reference, int n) {
  const auto c = ngram_counts(candidate, n);
  const auto r = ngram_counts(reference, n);
  std::size_t m = 0;
  for (const auto& [g, k] : c) {
    auto it = r.find(g);
    if (it != r.end()) m += std::min(k, it->second);
  }
  return m;
}

NgramScore prf(double overlap, double cand_total, double ref_total) {
  NgramScore s;
  s.precision = cand_total > 0 ? overlap / cand_total : 0.0;
  s.recall = ref_total > 0 ? overlap / ref_total : 0.0;
  s.f1 = s.precision + s.recall > 0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

LexicalProfile lexical_from(std::span<const std::string> tokens,
                            std::size_t bigram_vocab) {
  if (tokens.empty()) throw ValidationError("lexical profile of empty text");
  std::map<std::string_view, std::size_t> freq;
  for (const auto& t : tokens) ++freq[t];
  std::map<std::size_t, std::size_t> spectrum;  // i -> V_i
  for (const auto& [t, k] : freq) ++spectrum[k];
  const double n = static_cast<double>(tokens.size());
  double s2 = 0.0;
  for (const auto& [i, vi] : spectrum) {
    s2 += static_cast<double>(i) * static_cast<double>(i) *
          static_cast<double>(vi);
  }
  LexicalProfile p;
  p.ttr = static_cast<double>(freq.size()) / n;
  p.yules_k = 1e4 * (s2 - n) / (n * n);
  p.bigram_vocab_size = bigram_vocab;
  return p;
}

}  // namespace

TokenizedText tokenize_for_stats(std::string_view text) {
  TokenizedText out;
  out.tokens = stat_words(text);
  std::size_t begin = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const bool terminal = c == '.' || c == '!' || c == '?';
    const bool boundary =
        i + 1 == text.size() ||
        std::isspace(static_cast<unsigned char>(text[i + 1]));
    if (terminal && boundary) {
      auto words = stat_words(text.substr(begin, i + 1 - begin));
      if (!words.empty()) out.sentences.push_back(std::move(words));
      begin = i + 1;
    }
  }
  if (begin < text.size()) {
    auto words = stat_words(text.substr(begin));
    if (!words.empty()) out.sentences.push_back(std::move(words));
  }
  for (const auto& t : out.tokens) out.syllables.push_back(count_syllables(t));
  return out;
}

int count_syllables(std::string_view word) {
  auto vowel = [](char c) {
    switch (std::tolower(static_cast<unsigned char>(c))) {
      case 'a': case 'e': case 'i': case 'o': case 'u': case 'y':
        return true;
      default:
        return false;
    }
  };
  int groups = 0;
  bool in_group = false;
  for (char c : word) {
    const bool v = vowel(c);
    if (v && !in_group) ++groups;
    in_group = v;
  }
  if (!word.empty() && std::tolower(static_cast<unsigned char>(word.back())) == 'e') {
    --groups;
  }
  return std::max(groups, 1);
}

LexicalProfile lexical_profile(std::string_view text) {
  const auto tokens = stat_words(text);
  return lexical_profile(tokens);
}

LexicalProfile lexical_profile(std::span<const std::string> tokens) {
  const auto bigrams = ngrams(tokens, 2);
  const std::set<std::string> distinct(bigrams.begin(), bigrams.end());
  return lexical_from(tokens, distinct.size());
}

LexicalProfile corpus_lexical_profile(std::span<const std::string> documents) {
  std::vector<std::string> all;
  std::set<std::string> bigrams;
  for (const auto& d : documents) {
    auto words = stat_words(d);
    for (auto& g : ngrams(words, 2)) bigrams.insert(std::move(g));
    all.insert(all.end(), words.begin(), words.end());
  }
  return lexical_from(all, bigrams.size());
}

const EasyWordList& EasyWordList::bundled() {
  static const EasyWordList list = from_text(kBundledEasyWords);
  return list;
}

EasyWordList EasyWordList::from_text(std::string_view content) {
  EasyWordList list;
  for (auto& w : stat_words(content)) list.words_.insert(std::move(w));
  return list;
}

EasyWordList EasyWordList::load(const std::filesystem::path& path) {
  return from_text(read_file(path));
}

bool EasyWordList::contains(std::string_view word) const {
  return words_.find(word) != words_.end();
}

ReadabilityProfile readability_profile(std::string_view text,
                                       const EasyWordList& easy) {
  const auto t = tokenize_for_stats(text);
  if (t.sentences.empty() || t.tokens.empty()) {
    throw ValidationError("readability needs at least one sentence");
  }
  const double words = static_cast<double>(t.tokens.size());
  const double sentences = static_cast<double>(t.sentences.size());
  double syllables = 0.0;
  double polysyllables = 0.0;
  double hard = 0.0;
  for (std::size_t i = 0; i < t.tokens.size(); ++i) {
    syllables += t.syllables[i];
    if (t.syllables[i] >= 3) polysyllables += 1.0;
    if (!easy.contains(t.tokens[i])) hard += 1.0;
  }
  ReadabilityProfile r;
  r.flesch_reading_ease =
      206.835 - 1.015 * (words / sentences) - 84.6 * (syllables / words);
  r.smog = 1.0430 * std::sqrt(polysyllables * 30.0 / sentences) + 3.1291;
  const double hard_pct = 100.0 * hard / words;
  r.dale_chall = 0.1579 * hard_pct + 0.0496 * (words / sentences);
  if (hard_pct > 5.0) r.dale_chall += 3.6365;
  return r;
}

std::map<int, double> overlap_profile(std::span<const std::string> machine,
                                      std::span<const std::string> human,
                                      std::span<const int> orders) {
  if (machine.empty() || human.empty()) {
    throw ValidationError("overlap_profile needs two nonempty corpora");
  }
  std::map<int, double> out;
  for (int n : orders) {
    std::set<std::string> m, h;
    for (const auto& d : machine) {
      for (auto& g : ngrams(stat_words(d), n)) m.insert(std::move(g));
    }
    for (const auto& d : human) {
      for (auto& g : ngrams(stat_words(d), n)) h.insert(std::move(g));
    }
    if (m.empty()) {
      throw ValidationError("machine corpus has no " + std::to_string(n) +
                            "-grams");
    }
    std::size_t shared = 0;
    for (const auto& g : m) shared += h.count(g);
    out[n] = static_cast<double>(shared) / static_cast<double>(m.size());
  }
  return out;
}

NgramScore rouge_n(std::span<const std::string> candidate,
                   std::span<const std::string> reference, int n) {
  // Both texts too short for order n: identical texts still score 1.
  if (ngrams(candidate, n).empty() && ngrams(reference, n).empty()) {
    const bool same = !candidate.empty() &&
                      std::equal(candidate.begin(), candidate.end(),
                                 reference.begin(), reference.end());
    const double v = same ? 1.0 : 0.0;
    return {v, v, v};
  }
  const double overlap =
      static_cast<double>(clipped_matches(candidate, reference, n));
  return prf(overlap, static_cast<double>(ngrams(candidate, n).size()),
             static_cast<double>(ngrams(reference, n).size()));
}

NgramScore rouge_l(std::span<const std::string> candidate,
                   std::span<const std::string> reference) {
  const auto m = candidate.size();
  const auto n = reference.size();
  std::vector<std::size_t> prev(n + 1, 0), cur(n + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      cur[j] = candidate[i - 1] == reference[j - 1]
                   ? prev[j - 1] + 1
                   : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prf(static_cast<double>(prev[n]), static_cast<double>(m),
             static_cast<double>(n));
}

double bleu(std::span<const std::string> candidate,
            std::span<const std::string> reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const int max_order = static_cast<int>(std::min<std::size_t>(4, candidate.size()));
  if (clipped_matches(candidate, reference, 1) == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_order; ++n) {
    const double total =
        static_cast<double>(candidate.size() - static_cast<std::size_t>(n) + 1);
    double matches =
        static_cast<double>(clipped_matches(candidate, reference, n));
    if (matches == 0.0) matches = kBleuEpsilon;
    log_sum += std::log(matches / total);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / max_order);
}

ContentSimilarity content_similarity(std::string_view candidate,
                                     std::string_view reference) {
  const auto c = stat_words(candidate);
  const auto r = stat_words(reference);
  ContentSimilarity s;
  s.rouge1_f1 = rouge_n(c, r, 1).f1;
  s.rouge2_f1 = rouge_n(c, r, 2).f1;
  s.rougeL_f1 = rouge_l(c, r).f1;
  s.bleu = bleu(c, r);
  return s;
}

double log_ppl(std::string_view document, const Vocabulary& vocabulary,
               const PolicyParams& policy) {
  std::istringstream in{std::string(document)};
  std::string word;
  double nll = 0.0;
  std::size_t scored = 0;
  Context ctx = Context::start();
  while (in >> word) {
    auto id = vocabulary.find(word);
    if (!id) {
      ctx = Context::start();
      continue;
    }
    nll -= log_softmax(policy.row(ctx))[*id];
    ++scored;
    ctx = Context::token(*id);
  }
  if (scored == 0) throw ValidationError("document has no scorable tokens");
  return nll / static_cast<double>(scored);
}

double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

LogPplSummary log_ppl_profile(std::span<const std::string> documents,
                              const Vocabulary& vocabulary,
                              const PolicyParams& policy) {
  if (documents.empty()) throw ValidationError("log-PPL of an empty corpus");
  LogPplSummary s;
  for (const auto& d : documents) {
    s.per_document.push_back(log_ppl(d, vocabulary, policy));
  }
  std::vector<double> sorted = s.per_document;
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (double v : sorted) total += v;
  s.mean = total / static_cast<double>(sorted.size());
  s.q1 = quantile(sorted, 0.25);
  s.median = quantile(sorted, 0.5);
  s.q3 = quantile(sorted, 0.75);
  return s;
}

StatProfile corpus_stat_profile(std::span<const std::string> documents,
                                std::span<const std::string> references,
                                std::span<const int> orders,
                                const EasyWordList& easy) {
  if (documents.empty()) throw ValidationError("empty corpus");
  if (documents.size() != references.size()) {
    throw ValidationError("documents and references must align one to one");
  }
  StatProfile p;
  const auto lex = corpus_lexical_profile(documents);
  p.ttr_corpus = lex.ttr;
  p.yules_k = lex.yules_k;
  p.bigram_vocab_size = lex.bigram_vocab_size;

  std::size_t lexical_docs = 0;
  std::size_t readable_docs = 0;
  for (std::size_t i = 0; i < documents.size(); ++i) {
    const auto words = stat_words(documents[i]);
    if (words.empty()) continue;
    p.ttr_document_mean += lexical_profile(std::span<const std::string>(words)).ttr;
    ++lexical_docs;
    const auto r = readability_profile(documents[i], easy);
    p.flesch_reading_ease += r.flesch_reading_ease;
    p.smog += r.smog;
    p.dale_chall += r.dale_chall;
    ++readable_docs;
  }
  if (lexical_docs) p.ttr_document_mean /= static_cast<double>(lexical_docs);
  if (readable_docs) {
    const double n = static_cast<double>(readable_docs);
    p.flesch_reading_ease /= n;
    p.smog /= n;
    p.dale_chall /= n;
  }

  for (int n : orders) {
    const int one[] = {n};
    try {
      p.overlap[n] = overlap_profile(documents, references, one).at(n);
    } catch (const ValidationError&) {
      // no n-grams of this order in the documents
    }
  }

  for (std::size_t i = 0; i < documents.size(); ++i) {
    const auto s = content_similarity(documents[i], references[i]);
    p.similarity.rouge1_f1 += s.rouge1_f1;
    p.similarity.rouge2_f1 += s.rouge2_f1;
    p.similarity.rougeL_f1 += s.rougeL_f1;
    p.similarity.bleu += s.bleu;
  }
  const double n = static_cast<double>(documents.size());
  p.similarity.rouge1_f1 /= n;
  p.similarity.rouge2_f1 /= n;
  p.similarity.rougeL_f1 /= n;
  p.similarity.bleu /= n;
  return p;
}

std::string stat_profile_csv_rows(std::string_view variant,
                                  const StatProfile& p) {
  std::string out;
  auto row = [&](const std::string& metric, const std::string& value) {
    out += csv_escape(variant) + "," + metric + "," + value + "\n";
  };
  row("ttr_document_mean", format_fixed(p.ttr_document_mean, 4));
  row("ttr_corpus", format_fixed(p.ttr_corpus, 4));
  row("yules_k", format_fixed(p.yules_k, 2));
  row("bigram_vocab_size", std::to_string(p.bigram_vocab_size));
  row("flesch_reading_ease", format_fixed(p.flesch_reading_ease, 2));
  row("smog", format_fixed(p.smog, 2));
  row("dale_chall", format_fixed(p.dale_chall, 2));
  for (const auto& [n, rate] : p.overlap) {
    row("overlap_" + std::to_string(n) + "gram", format_fixed(rate, 4));
  }
  row("rouge1_f1", format_fixed(p.similarity.rouge1_f1, 4));
  row("rouge2_f1", format_fixed(p.similarity.rouge2_f1, 4));
  row("rougeL_f1", format_fixed(p.similarity.rougeL_f1, 4));
  row("bleu", format_fixed(p.similarity.bleu, 4));
  if (p.mean_log_ppl) row("mean_log_ppl", format_fixed(*p.mean_log_ppl, 4));
  return out;
}

std::string log_ppl_csv(
    const std::vector<std::pair<std::string, LogPplSummary>>& summaries) {
  std::string out = "variant,mean,q1,median,q3\n";
  for (const auto& [variant, s] : summaries) {
    out += csv_escape(variant) + "," + format_fixed(s.mean, 4) + "," +
           format_fixed(s.q1, 4) + "," + format_fixed(s.median, 4) + "," +
           format_fixed(s.q3, 4) + "\n";
  }
  return out;
}

}  // namespace maga
