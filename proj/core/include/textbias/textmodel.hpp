#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "textbias/corpus.hpp"

namespace textbias {

// Hashed bag-of-ngrams featurizer. Tokens are whitespace-split, ASCII
// lowercased, and stripped of leading/trailing ASCII punctuation; tokens that
// become empty are dropped. Each unigram and each adjacent bigram is hashed
// with 64-bit FNV-1a into one of bucket_count embedding rows.
struct FeaturizerConfig {
  std::size_t bucket_count = 2'000'000;
  bool use_bigrams = true;
  bool lowercase = true;
};

std::uint64_t fnv1a64(std::string_view bytes);

// Feature indices for one text: all unigrams in order, then all bigrams.
// Empty or all-punctuation text yields an empty list.
std::vector<std::uint32_t> featurize(std::string_view text, const FeaturizerConfig& cfg);

// Linear text classifier over mean-pooled hashed embeddings, trained with
// plain SGD on softmax cross-entropy. The same architecture serves both label
// prediction and nuisance prediction; the target space says which.
struct TrainerConfig {
  int dim = 20;
  double learning_rate = 0.25;  // decays linearly to zero over all updates
  int epochs = 5;
  FeaturizerConfig featurizer;
};

struct TrainedClassifier {
  FeaturizerConfig featurizer;
  int dim = 0;
  std::vector<std::string> target_space;
  std::vector<double> embeddings;  // bucket_count x dim, row-major
  std::vector<double> head;        // |targets| x dim, class-major
  std::vector<double> bias;        // |targets|

  std::size_t num_targets() const { return target_space.size(); }
};

struct Prediction {
  int target = 0;
  std::vector<double> probs;
};

// Trains on arbitrary (text, target) pairs. texts and targets must have equal
// length; targets index into target_space. Samples with no features are
// skipped (counted in *skipped if given); training on an empty or all-skipped
// input is an error.
TrainedClassifier train_text_classifier(const std::vector<std::string_view>& texts,
                                        const std::vector<int>& targets,
                                        std::vector<std::string> target_space,
                                        const TrainerConfig& cfg, std::uint64_t seed,
                                        std::size_t* skipped = nullptr);

// Convenience wrapper: targets are the dataset labels.
TrainedClassifier train(const Dataset& d, const TrainerConfig& cfg, std::uint64_t seed,
                        std::size_t* skipped = nullptr);

// Softmax probabilities and argmax target (lowest index wins ties). A text
// with no features scores from the bias alone; with a zero-initialized head
// that is the uniform distribution.
Prediction predict(const TrainedClassifier& m, std::string_view text);

// Per-target log-probabilities, computed stably in log space.
std::vector<double> predict_logprobs(const TrainedClassifier& m, std::string_view text);

// Mean-pooled embedding of the text's features: the model's representation.
std::vector<double> represent(const TrainedClassifier& m, std::string_view text);

// Fraction of samples whose predicted target equals their label.
double accuracy(const TrainedClassifier& m, const Dataset& d);

void save_classifier(const TrainedClassifier& m, const std::string& path);
TrainedClassifier load_classifier(const std::string& path);

// Loss and analytic gradients for one sample, exposed for gradient checking.
// Embedding gradients are sparse: row index -> d(loss)/d(row).
struct ClassifierGradients {
  std::vector<double> head;  // |targets| x dim, class-major
  std::vector<double> bias;  // |targets|
  std::map<std::uint32_t, std::vector<double>> embeddings;
};

double sample_loss(const TrainedClassifier& m, const std::vector<std::uint32_t>& features,
                   int target);
ClassifierGradients sample_gradients(const TrainedClassifier& m,
                                     const std::vector<std::uint32_t>& features, int target);

}  // namespace textbias
