#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "maga/corpus.hpp"

namespace maga {

enum class Tokenization { kCharacter, kWord };

struct FeatureSpec {
  std::vector<int> orders{1, 2};
  std::size_t dimension = 1 << 12;
  std::uint64_t hash_seed = 0;
  Tokenization mode = Tokenization::kWord;
  bool l2_normalize = false;

  void validate() const;
};

/// Sparse hashed n-gram counts, indices strictly increasing.
struct FeatureVector {
  std::size_t dimension = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;

  double total() const;
  std::vector<double> dense() const;
};

struct DetectorParams {
  std::vector<double> weights;
  double bias = 0.0;

  static DetectorParams zeros(std::size_t dimension) {
    return {std::vector<double>(dimension, 0.0), 0.0};
  }
  bool operator==(const DetectorParams&) const = default;
};

struct LabeledFeatures {
  FeatureVector features;
  int label = kHumanLabel;
};

struct TrainHyper {
  int epochs = 20;
  std::size_t batch_size = 64;
  double learning_rate = 0.5;
  double l2 = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  DetectorParams params;
  std::vector<double> epoch_loss;  // mean minibatch BCE per epoch
};

struct BceGradient {
  std::vector<double> weights;
  double bias = 0.0;
};

/// Tokens for feature extraction: UTF-8 code points or whitespace words.
std::vector<std::string> feature_tokens(std::string_view text,
                                        Tokenization mode);

FeatureVector featurize(std::string_view text, const FeatureSpec& spec);

double logit(const DetectorParams& params, const FeatureVector& features);

/// sigmoid(w . f + b), the probability the text is machine-generated.
double score(const DetectorParams& params, const FeatureVector& features);

/// Mean binary cross-entropy; for a balanced batch this is the 1/(2N)
/// paired form.
double bce_loss(const DetectorParams& params,
                std::span<const LabeledFeatures> batch);

BceGradient bce_gradient(const DetectorParams& params,
                         std::span<const LabeledFeatures> batch);

/// Minibatch gradient descent on BCE + (l2 / 2) |w|^2.
TrainResult train_examples(DetectorParams init,
                           std::span<const LabeledFeatures> examples,
                           const TrainHyper& hyper);

/// Trains on a paired corpus. When a title has several machine texts one
/// is drawn per epoch (seeded), keeping every epoch 1:1.
TrainResult train(DetectorParams init, const PairedCorpus& corpus,
                  const FeatureSpec& spec, const TrainHyper& hyper);

double accuracy(const DetectorParams& params,
                std::span<const LabeledFeatures> examples,
                double threshold = 0.5);

/// r = 1 - D(text).
double reward(const DetectorParams& params, std::string_view text,
              const FeatureSpec& spec);

struct DetectorCheckpoint {
  static constexpr int kVersion = 1;
  FeatureSpec spec;
  DetectorParams params;
};

nlohmann::json feature_spec_to_json(const FeatureSpec& spec);
FeatureSpec feature_spec_from_json(const nlohmann::json& j);
TrainHyper train_hyper_from_json(const nlohmann::json& j);
nlohmann::json train_hyper_to_json(const TrainHyper& hyper);

void save_checkpoint(const std::filesystem::path& path,
                     const DetectorCheckpoint& ckpt);
DetectorCheckpoint load_checkpoint(const std::filesystem::path& path);
nlohmann::json checkpoint_to_json(const DetectorCheckpoint& ckpt);
DetectorCheckpoint checkpoint_from_json(const nlohmann::json& j);

}  // namespace maga
