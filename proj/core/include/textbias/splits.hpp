#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "textbias/corpus.hpp"

namespace textbias {

// Robustness splits. Both produce a train set plus two test sets: test_same,
// which shares train's label/nuisance association, and test_shifted, where
// that association is broken. The three parts are pairwise disjoint.

// Training bias split: each retained nuisance value s gets a favored label
// y_s; under bias strength beta, a fraction beta of s's training samples
// carry y_s and the rest is spread evenly over the other labels. Sources are
// randomly grouped |Y| at a time and each group's favored labels form a
// bijection onto the label space, so the global label marginal stays
// uniform. Leftover sources that fit no full group are dropped.
struct GtbPlan {
  double beta = 0.5;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  std::vector<int> favored;                 // per nuisance index; -1 = dropped
  std::vector<int> dropped_sources;         // ascending
  std::vector<std::vector<int>> groups;     // retained sources, |Y| each
};

// Group unseen split: a random half of the nuisance values is held out
// entirely. test_shifted holds every sample of the unseen sources;
// train/test_same are a stratified holdout split of the seen sources.
struct GuPlan {
  std::uint64_t seed = 0;
  double holdout_fraction = 0.2;
  std::size_t k_unknown = 0;
  std::vector<int> known_sources;    // ascending
  std::vector<int> unknown_sources;  // ascending
};

struct SplitResult {
  Dataset train;
  Dataset test_shifted;
  Dataset test_same;
  std::variant<GtbPlan, GuPlan> plan;
};

// Stratified iid split: every (label, nuisance) cell contributes
// floor(test_fraction * cell size) uniformly chosen samples to the test side.
// Both sides preserve input order. Errors if any cell has fewer than two
// samples.
std::pair<Dataset, Dataset> iid_split(const Dataset& d, double test_fraction,
                                      std::uint64_t seed);

// Builds the training-bias split. The input must be label-balanced per
// nuisance value and have at least |Y| nuisance values. The iid test pool is
// halved per cell: one half, restricted to retained sources, becomes
// test_shifted (so its label/nuisance table stays exactly balanced); the
// other half is biased with the same favored map to form test_same.
SplitResult gtb_split(const Dataset& d, double beta, std::uint64_t seed,
                      double test_fraction = 0.2);

// Builds the group-unseen split. k_unknown nuisance values are drawn
// uniformly without replacement.
SplitResult gu_split(const Dataset& d, std::size_t k_unknown, std::uint64_t seed,
                     double holdout_fraction = 0.2);

// Persists train.jsonl, test_shifted.jsonl, test_same.jsonl and plan.json
// into dir (created if needed).
void write_split_dir(const SplitResult& sr, const std::string& dir);

// Reads a split directory back. The three datasets are remapped onto one
// shared nuisance space; plan references are resolved against it.
SplitResult load_split_dir(const std::string& dir);

}  // namespace textbias
