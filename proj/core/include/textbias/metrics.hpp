#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "textbias/corpus.hpp"
#include "textbias/probe.hpp"
#include "textbias/splits.hpp"
#include "textbias/textmodel.hpp"

namespace textbias {

// Robustness and fairness measurements of a trained classifier against a
// split. Normalized scores are percentages: 100 * acc_shifted / acc_same, so
// 100 means the model is unaffected by the association shift.

enum class MetricKind { Gtb, Gu };

struct MetricContext {
  MetricKind kind = MetricKind::Gtb;
  std::string dataset;  // subset name, e.g. "D0"
  int iteration = -1;   // filtering iteration, -1 when standalone
  double beta = -1.0;   // GTB only
  std::uint64_t seed = 0;
  int seed_index = -1;  // GU only: which repetition
};

struct MetricReport {
  MetricContext context;
  double acc_same = 0.0;
  double acc_shifted = 0.0;
  double normalized = 0.0;  // percent
  // Per-label demographic disparity on test_same, keyed by label index.
  // Empty for GU splits and for beta = 0.5 (no favored side exists there).
  std::map<int, double> disc;
  std::map<int, double> disc_ratio;  // percent of the perfect model's 2b - 1
  double identifiability = -1.0;     // percent; -1 until a probe fills it in
  double majority_baseline = -1.0;   // percent
};

// Demographic disparity of predictions on d for label y: the difference in
// the rate of predicting y between samples whose nuisance value favors y
// under bias_table (argmax of the table's column) and all other samples.
// Errors when a column's argmax is tied (ambiguous protected group) or when
// either group is empty.
double discrimination(const std::vector<int>& predictions, const Dataset& d,
                      const ContingencyTable& bias_table, int y);

// Rescales disc by the disparity of the bias-following perfect model, 2b - 1.
// beta must exceed 0.5.
double disc_ratio(double disc, double beta);

// Predicted label of every sample, in order.
std::vector<int> predict_labels(const TrainedClassifier& m, const Dataset& d);

// Accuracy pair, normalized score, and per-label discrimination on test_same
// against the training bias table. The split must carry a GtbPlan.
MetricReport gtb_metric(const TrainedClassifier& m, const SplitResult& sr);

// Accuracy pair and normalized score for a group-unseen split.
MetricReport gu_metric(const TrainedClassifier& m, const SplitResult& sr);

// Trains a probe on an 80/20 stratified holdout of (reps, targets) and
// returns held-out accuracy in percent; *majority gets the held-out majority
// class rate in percent if given.
double probe_identifiability(const std::vector<std::vector<double>>& reps,
                             const std::vector<int>& targets,
                             std::vector<std::string> target_space, const ProbeConfig& cfg,
                             double* majority = nullptr);

// How well a probe recovers the nuisance value from the model's
// representations of the training samples (percent).
double identifiability_gtb(const TrainedClassifier& m, const SplitResult& sr,
                           const ProbeConfig& cfg, double* majority = nullptr);

// How well a probe tells seen-source representations (train + test_same) from
// unseen-source ones (test_shifted), class-balanced by downsampling (percent).
double identifiability_gu(const TrainedClassifier& m, const SplitResult& sr,
                          const ProbeConfig& cfg, double* majority = nullptr);

// One row per report. Columns:
// dataset,iteration,metric_kind,beta_or_seed,acc_same,acc_shifted,normalized,
// disc,disc_ratio,identifiability,majority_baseline
// disc and disc_ratio are for label 1 (the positive class); absent values are
// empty fields.
void write_metrics_csv(const std::vector<MetricReport>& reports, const std::string& path);

}  // namespace textbias
