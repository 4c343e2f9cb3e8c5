#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace textbias {

// Identifiability probe: a small MLP trained to recover a categorical target
// (a nuisance value, or split membership) from frozen model representations.
// Architecture: input -> 100 ReLU -> 200 ReLU -> softmax.

struct AdamConfig {
  double step = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct ProbeConfig {
  int hidden1 = 100;
  int hidden2 = 200;
  int epochs = 10;
  int batch_size = 128;
  AdamConfig adam;
  std::uint64_t seed = 0;
};

struct TrainedProbe {
  int input_dim = 0;
  int hidden1 = 0;
  int hidden2 = 0;
  std::vector<std::string> target_space;
  // Row-major weight matrices, one row per output unit, plus per-unit biases.
  std::vector<double> w1, b1;  // hidden1 x input_dim, hidden1
  std::vector<double> w2, b2;  // hidden2 x hidden1, hidden2
  std::vector<double> w3, b3;  // |targets| x hidden2, |targets|

  std::size_t num_targets() const { return target_space.size(); }
};

// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
TrainedProbe init_probe(int input_dim, int hidden1, int hidden2,
                        std::vector<std::string> target_space, std::uint64_t seed);

// Softmax output for one representation.
std::vector<double> probe_forward(const TrainedProbe& p, const std::vector<double>& rep);

// Argmax target, lowest index on ties.
int probe_predict(const TrainedProbe& p, const std::vector<double>& rep);

// Minibatch Adam on softmax cross-entropy. reps must share one dimension;
// targets index into target_space. Errors on empty input.
TrainedProbe train_probe(const std::vector<std::vector<double>>& reps,
                         const std::vector<int>& targets,
                         std::vector<std::string> target_space, const ProbeConfig& cfg);

// Fraction of reps whose predicted target matches.
double probe_accuracy(const TrainedProbe& p, const std::vector<std::vector<double>>& reps,
                      const std::vector<int>& targets);

// Mean cross-entropy loss of a batch, and its analytic gradients; exposed for
// gradient checking. The training loop uses the same backward pass.
struct ProbeGradients {
  std::vector<double> w1, b1, w2, b2, w3, b3;
};

double probe_batch_loss(const TrainedProbe& p, const std::vector<std::vector<double>>& reps,
                        const std::vector<int>& targets);
ProbeGradients probe_batch_gradients(const TrainedProbe& p,
                                     const std::vector<std::vector<double>>& reps,
                                     const std::vector<int>& targets);

// Index split for probe evaluation: a stratified holdout with floor(fraction)
// of every target class held out. Returns (train indices, eval indices), each
// in ascending order.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    const std::vector<int>& targets, double eval_fraction, std::uint64_t seed);

}  // namespace textbias
