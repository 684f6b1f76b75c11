#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maga/sampler.hpp"

namespace maga {

/// Lowercased, punctuation-stripped words plus sentence segmentation.
struct TokenizedText {
  std::vector<std::string> tokens;
  std::vector<std::vector<std::string>> sentences;
  std::vector<int> syllables;  // parallel to tokens
};

TokenizedText tokenize_for_stats(std::string_view text);

/// Vowel-group heuristic: maximal runs of aeiouy, minus a silent trailing
/// 'e', at least 1.
int count_syllables(std::string_view word);

struct LexicalProfile {
  double ttr = 0.0;
  double yules_k = 0.0;
  std::size_t bigram_vocab_size = 0;
};

LexicalProfile lexical_profile(std::string_view text);
LexicalProfile lexical_profile(std::span<const std::string> tokens);

/// Type-token ratio and Yule's K over the concatenated token stream; bigram
/// vocabulary deduplicated across the corpus but not spanning documents.
LexicalProfile corpus_lexical_profile(std::span<const std::string> documents);

struct ReadabilityProfile {
  double flesch_reading_ease = 0.0;
  double smog = 0.0;
  double dale_chall = 0.0;
};

class EasyWordList {
 public:
  /// Small bundled list of very common English words.
  static const EasyWordList& bundled();
  static EasyWordList from_text(std::string_view content);
  static EasyWordList load(const std::filesystem::path& path);

  bool contains(std::string_view word) const;
  std::size_t size() const { return words_.size(); }

 private:
  std::set<std::string, std::less<>> words_;
};

ReadabilityProfile readability_profile(
    std::string_view text, const EasyWordList& easy = EasyWordList::bundled());

/// For each n: |distinct machine n-grams ∩ distinct human n-grams| /
/// |distinct machine n-grams|.
std::map<int, double> overlap_profile(std::span<const std::string> machine,
                                      std::span<const std::string> human,
                                      std::span<const int> orders);

struct NgramScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Clipped n-gram overlap. When neither text has an n-gram of order n the
/// score is 1 for identical nonempty texts and 0 otherwise.
NgramScore rouge_n(std::span<const std::string> candidate,
                   std::span<const std::string> reference, int n);
NgramScore rouge_l(std::span<const std::string> candidate,
                   std::span<const std::string> reference);

inline constexpr double kBleuEpsilon = 1e-9;

/// Uniform weights up to order 4 (fewer when the candidate is shorter),
/// clipped precisions, brevity penalty, zero counts replaced by epsilon.
/// Zero when no unigram matches.
double bleu(std::span<const std::string> candidate,
            std::span<const std::string> reference);

struct ContentSimilarity {
  double rouge1_f1 = 0.0;
  double rouge2_f1 = 0.0;
  double rougeL_f1 = 0.0;
  double bleu = 0.0;
};

ContentSimilarity content_similarity(std::string_view candidate,
                                     std::string_view reference);

struct LogPplSummary {
  std::vector<double> per_document;
  double mean = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

/// Mean negative log-probability per token under the untruncated scoring
/// policy. Out-of-vocabulary words are skipped and reset the context to the
/// start row; a document with no scorable word is an error.
double log_ppl(std::string_view document, const Vocabulary& vocabulary,
               const PolicyParams& policy);
LogPplSummary log_ppl_profile(std::span<const std::string> documents,
                              const Vocabulary& vocabulary,
                              const PolicyParams& policy);

/// Linear-interpolation quantile of a sorted sample (numpy "linear").
double quantile(std::span<const double> sorted, double q);

struct StatProfile {
  double ttr_document_mean = 0.0;
  double ttr_corpus = 0.0;
  double yules_k = 0.0;
  std::size_t bigram_vocab_size = 0;
  double flesch_reading_ease = 0.0;
  double smog = 0.0;
  double dale_chall = 0.0;
  std::map<int, double> overlap;
  ContentSimilarity similarity;
  std::optional<double> mean_log_ppl;
};

/// Profile of `documents` against `references`. Similarity averages over
/// the aligned pairs (documents[i], references[i]); overlap uses every
/// order in `orders` for which the documents have n-grams. Readability is
/// the per-document mean over nonempty documents.
StatProfile corpus_stat_profile(std::span<const std::string> documents,
                                std::span<const std::string> references,
                                std::span<const int> orders,
                                const EasyWordList& easy = EasyWordList::bundled());

/// Stats-report rows `variant,metric,value`.
std::string stat_profile_csv_rows(std::string_view variant,
                                  const StatProfile& profile);
/// `variant,mean,q1,median,q3`.
std::string log_ppl_csv(const std::vector<std::pair<std::string, LogPplSummary>>&
                            summaries);

}  // namespace maga
