#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "textbias/corpus.hpp"
#include "textbias/textmodel.hpp"

namespace textbias {

// Mutual information machinery, all in nats.
//
// plug_in_mi is the exact estimator on a discrete contingency table. For
// I(text; nuisance) no such table exists, so a classifier trained to predict
// the nuisance from the text yields the lower bound
//   I(X; S) >= H(S) - E[-log q(s | x)]
// evaluated out-of-fold: the dataset is cut into n_folds parts, each fold is
// scored by a model trained on its complement.

// Entropy of a count vector, in nats. Zero counts contribute zero.
double entropy_nats(std::span<const std::int64_t> counts);

// Plug-in mutual information of a joint count table. Exactly 0.0 for tables
// whose rows are proportional (independence), because each log ratio is
// computed from integer products. Errors on an empty table.
double plug_in_mi(const ContingencyTable& t);

// One sample's share of the lower bound: i(x) = H(S) + log q(s|x), where H(S)
// is the nuisance entropy of the scoring model's training complement and s is
// the sample's observed nuisance. Uninformative texts under a zero head give
// i(x) = H(S) - log |S| (zero for a uniform complement).
struct ContributionEntry {
  std::size_t sample_index = 0;
  int fold = 0;
  double contribution = 0.0;
};

struct ContributionTable {
  std::vector<ContributionEntry> entries;  // one per sample, in sample order
  std::vector<double> fold_entropies;      // H(S) of each fold's training complement
  double marginal_entropy = 0.0;           // H(S) of the whole dataset
  int n_folds = 0;
};

// Stratified fold assignment: per (label, nuisance) cell the samples are
// shuffled and dealt round-robin, so folds are equal-sized within one of each
// other both globally and per cell. Errors if the dataset has fewer samples
// than folds.
std::vector<int> fold_assignment(const Dataset& d, int n_folds, std::uint64_t seed);

// Out-of-fold contributions: for each fold, trains a nuisance classifier on
// the complement and scores the fold's samples.
ContributionTable contributions(const Dataset& d, int n_folds, const TrainerConfig& trainer,
                                std::uint64_t seed);

struct MiEstimate {
  double value = 0.0;  // entropy_term - cross_entropy_term
  int n_folds = 0;
  double entropy_term = 0.0;        // mean training-complement entropy seen by samples
  double cross_entropy_term = 0.0;  // mean out-of-fold -log q(s|x)
};

MiEstimate estimate_mi(const ContributionTable& t);

// CSV with header "sample_index,fold,contribution".
void write_contributions_csv(const ContributionTable& t, const std::string& path);

}  // namespace textbias
