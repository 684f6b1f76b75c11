#include "maga/detector.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "maga/error.hpp"
#include "maga/rng.hpp"
#include "maga/text_io.hpp"

namespace maga {
namespace {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double example_loss(double z, int label) {
  return label == kMachineLabel ? softplus(-z) : softplus(z);
}

void check_dimension(const DetectorParams& params, const FeatureVector& f) {
  if (f.dimension != params.weights.size()) {
    throw ValidationError("feature dimension " + std::to_string(f.dimension) +
                          " does not match detector dimension " +
                          std::to_string(params.weights.size()));
  }
}

// Shared minibatch loop. `epoch_examples(e)` yields the examples of epoch e.
template <typename EpochExamples>
TrainResult run_epochs(DetectorParams params, const TrainHyper& hyper,
                       EpochExamples&& epoch_examples) {
  hyper.validate();
  TrainResult result;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::vector<LabeledFeatures> examples = epoch_examples(epoch);
    if (examples.empty()) throw ValidationError("empty training set");
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    CounterRng rng(derive_seed(hyper.seed, static_cast<std::uint64_t>(epoch)),
                   /*stream=*/1);
    stable_shuffle(std::span<std::size_t>(order), rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<LabeledFeatures> batch;
    for (std::size_t start = 0; start < order.size();
         start += hyper.batch_size) {
      const auto end = std::min(order.size(), start + hyper.batch_size);
      batch.clear();
      for (auto k = start; k < end; ++k) batch.push_back(examples[order[k]]);
      loss_sum += bce_loss(params, batch);
      ++batches;
      BceGradient g = bce_gradient(params, batch);
      for (std::size_t i = 0; i < params.weights.size(); ++i) {
        params.weights[i] -=
            hyper.learning_rate * (g.weights[i] + hyper.l2 * params.weights[i]);
      }
      params.bias -= hyper.learning_rate * g.bias;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  result.params = std::move(params);
  return result;
}

// Decodes one UTF-8 code point starting at s[i]; malformed bytes pass
// through as single-byte tokens.
std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;
}

}  // namespace

void FeatureSpec::validate() const {
  if (dimension < 2) throw ValidationError("hash dimension must be >= 2");
  if (dimension > (std::size_t{1} << 31)) {
    throw ValidationError("hash dimension too large");
  }
  if (orders.empty()) throw ValidationError("n-gram orders must be nonempty");
  for (int n : orders) {
    if (n < 1) throw ValidationError("n-gram order must be >= 1");
  }
}

void TrainHyper::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) {
    throw ValidationError("learning_rate must be positive");
  }
  if (!(l2 >= 0.0)) throw ValidationError("l2 must be >= 0");
}

double FeatureVector::total() const {
  double s = 0.0;
  for (const auto& [i, v] : entries) s += v;
  return s;
}

std::vector<double> FeatureVector::dense() const {
  std::vector<double> out(dimension, 0.0);
  for (const auto& [i, v] : entries) out[i] = v;
  return out;
}

std::vector<std::string> feature_tokens(std::string_view text,
                                        Tokenization mode) {
  std::vector<std::string> tokens;
  if (mode == Tokenization::kWord) {
    std::istringstream in{std::string(text)};
    std::string w;
    while (in >> w) tokens.push_back(std::move(w));
    return tokens;
  }
  for (std::size_t i = 0; i < text.size();) {
    const auto len = std::min(
        utf8_length(static_cast<unsigned char>(text[i])), text.size() - i);
    tokens.emplace_back(text.substr(i, len));
    i += len;
  }
  return tokens;
}

FeatureVector featurize(std::string_view text, const FeatureSpec& spec) {
  spec.validate();
  const auto tokens = feature_tokens(text, spec.mode);
  std::map<std::uint32_t, double> counts;
  std::string gram;
  for (int n : spec.orders) {
    const auto order = static_cast<std::size_t>(n);
    if (tokens.size() < order) continue;
    for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
      gram.clear();
      for (std::size_t k = 0; k < order; ++k) {
        if (k) gram.push_back('\x1f');
        gram += tokens[i + k];
      }
      const auto h = hash_bytes(gram, spec.hash_seed ^ mix64(order));
      counts[static_cast<std::uint32_t>(h % spec.dimension)] += 1.0;
    }
  }
  FeatureVector f;
  f.dimension = spec.dimension;
  f.entries.assign(counts.begin(), counts.end());
  if (spec.l2_normalize && !f.entries.empty()) {
    double norm = 0.0;
    for (const auto& [i, v] : f.entries) norm += v * v;
    norm = std::sqrt(norm);
    for (auto& [i, v] : f.entries) v /= norm;
  }
  return f;
}

double logit(const DetectorParams& params, const FeatureVector& features) {
  check_dimension(params, features);
  double z = params.bias;
  for (const auto& [i, v] : features.entries) z += params.weights[i] * v;
  return z;
}

double score(const DetectorParams& params, const FeatureVector& features) {
  return sigmoid(logit(params, features));
}

double bce_loss(const DetectorParams& params,
                std::span<const LabeledFeatures> batch) {
  if (batch.empty()) throw ValidationError("bce_loss of an empty batch");
  double total = 0.0;
  for (const auto& ex : batch) {
    if (ex.label != kHumanLabel && ex.label != kMachineLabel) {
      throw ValidationError("label must be 0 or 1");
    }
    total += example_loss(logit(params, ex.features), ex.label);
  }
  return total / static_cast<double>(batch.size());
}

BceGradient bce_gradient(const DetectorParams& params,
                         std::span<const LabeledFeatures> batch) {
  if (batch.empty()) throw ValidationError("bce_gradient of an empty batch");
  BceGradient g{std::vector<double>(params.weights.size(), 0.0), 0.0};
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    const double residual =
        (sigmoid(logit(params, ex.features)) - ex.label) * inv_n;
    for (const auto& [i, v] : ex.features.entries) g.weights[i] += residual * v;
    g.bias += residual;
  }
  return g;
}

TrainResult train_examples(DetectorParams init,
                           std::span<const LabeledFeatures> examples,
                           const TrainHyper& hyper) {
  std::vector<LabeledFeatures> all(examples.begin(), examples.end());
  return run_epochs(std::move(init), hyper, [&](int) { return all; });
}

TrainResult train(DetectorParams init, const PairedCorpus& corpus,
                  const FeatureSpec& spec, const TrainHyper& hyper) {
  if (corpus.empty()) throw ValidationError("cannot train on an empty corpus");
  if (init.weights.size() != spec.dimension) {
    throw ValidationError("initial detector dimension does not match features");
  }
  std::vector<LabeledFeatures> humans;
  std::vector<std::vector<LabeledFeatures>> machines;
  for (const auto& p : corpus.pairs) {
    humans.push_back({featurize(p.human.text, spec), kHumanLabel});
    auto& ms = machines.emplace_back();
    for (const auto& m : p.machines) {
      ms.push_back({featurize(m.text, spec), kMachineLabel});
    }
  }
  return run_epochs(std::move(init), hyper, [&](int epoch) {
    CounterRng pick(derive_seed(hyper.seed, static_cast<std::uint64_t>(epoch)),
                    /*stream=*/2);
    std::vector<LabeledFeatures> examples;
    examples.reserve(2 * humans.size());
    for (std::size_t i = 0; i < humans.size(); ++i) {
      examples.push_back(humans[i]);
      const auto& ms = machines[i];
      if (ms.size() == 1) {
        examples.push_back(ms.front());
      } else if (!ms.empty()) {
        examples.push_back(ms[pick.below(ms.size())]);
      }
    }
    return examples;
  });
}

double accuracy(const DetectorParams& params,
                std::span<const LabeledFeatures> examples, double threshold) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    const int pred = score(params, ex.features) >= threshold ? kMachineLabel
                                                             : kHumanLabel;
    correct += pred == ex.label;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

double reward(const DetectorParams& params, std::string_view text,
              const FeatureSpec& spec) {
  return 1.0 - score(params, featurize(text, spec));
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json feature_spec_to_json(const FeatureSpec& spec) {
  return {{"orders", spec.orders},
          {"dimension", spec.dimension},
          {"hash_seed", spec.hash_seed},
          {"mode", spec.mode == Tokenization::kWord ? "word" : "character"},
          {"l2_normalize", spec.l2_normalize}};
}

FeatureSpec feature_spec_from_json(const nlohmann::json& j) {
  FeatureSpec spec;
  try {
    spec.orders = j.value("orders", spec.orders);
    spec.dimension = j.value("dimension", spec.dimension);
    spec.hash_seed = j.value("hash_seed", spec.hash_seed);
    const auto mode = j.value("mode", std::string("word"));
    if (mode == "word") {
      spec.mode = Tokenization::kWord;
    } else if (mode == "character") {
      spec.mode = Tokenization::kCharacter;
    } else {
      throw ValidationError("feature mode must be 'word' or 'character'");
    }
    spec.l2_normalize = j.value("l2_normalize", spec.l2_normalize);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed feature spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

nlohmann::json train_hyper_to_json(const TrainHyper& h) {
  return {{"epochs", h.epochs},
          {"batch_size", h.batch_size},
          {"learning_rate", h.learning_rate},
          {"l2", h.l2},
          {"seed", h.seed}};
}

TrainHyper train_hyper_from_json(const nlohmann::json& j) {
  TrainHyper h;
  try {
    h.epochs = j.value("epochs", h.epochs);
    h.batch_size = j.value("batch_size", h.batch_size);
    h.learning_rate = j.value("learning_rate", h.learning_rate);
    h.l2 = j.value("l2", h.l2);
    h.seed = j.value("seed", h.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed train hyper: ") + e.what());
  }
  h.validate();
  return h;
}

nlohmann::json checkpoint_to_json(const DetectorCheckpoint& ckpt) {
  return {{"format", "maga-detector"},
          {"version", DetectorCheckpoint::kVersion},
          {"features", feature_spec_to_json(ckpt.spec)},
          {"weights", ckpt.params.weights},
          {"bias", ckpt.params.bias}};
}

DetectorCheckpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "maga-detector") {
      throw ValidationError("not a detector checkpoint");
    }
    if (j.at("version").get<int>() != DetectorCheckpoint::kVersion) {
      throw ValidationError("unsupported detector checkpoint version");
    }
    DetectorCheckpoint c;
    c.spec = feature_spec_from_json(j.at("features"));
    c.params.weights = j.at("weights").get<std::vector<double>>();
    c.params.bias = j.at("bias").get<double>();
    if (c.params.weights.size() != c.spec.dimension) {
      throw ValidationError("checkpoint weight count does not match dimension");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path,
                     const DetectorCheckpoint& ckpt) {
  write_file(path, checkpoint_to_json(ckpt).dump() + "\n");
}

DetectorCheckpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return checkpoint_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace maga
