#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "textbias/corpus.hpp"
#include "textbias/mi.hpp"
#include "textbias/textmodel.hpp"

namespace textbias {

// Bias amplification by rejection. Each iteration removes, from every
// (label, nuisance) cell of one nuisance value, the same number of
// lowest-contribution samples, so per-nuisance label balance survives while
// the retained texts become more nuisance-identifiable.

// Ascending-order empirical quantile at rank floor(alpha * (N - 1)).
double empirical_quantile(std::vector<double> values, double alpha);

struct RemovalLog {
  double alpha = 0.0;
  double epsilon = 0.0;                       // contribution threshold
  std::vector<std::int64_t> removed_per_cell; // label-major, |Y| x |S|
  std::int64_t total_removed = 0;
};

// One rejection pass. epsilon is the alpha-quantile of all contributions; for
// each nuisance value s, n_s = min over labels of |{x in cell : i(x) < eps}|,
// and the n_s lowest-contribution samples of every label's cell of s are
// dropped (ties broken by sample index). Requires a per-nuisance
// label-balanced dataset and a contribution table computed on exactly d.
std::pair<Dataset, RemovalLog> reject_iteration(const Dataset& d, double alpha,
                                                const ContributionTable& ct);

struct FilterSchedule {
  std::vector<double> alphas;  // one rejection strength per iteration
  int n_folds = 10;
  std::uint64_t seed = 0;
};

// D_0 (the input), D_1, ..., D_k for k = |alphas|, with an MI estimate and
// contribution table for every subset and a removal log per iteration.
struct FilterSequence {
  std::vector<Dataset> subsets;
  std::vector<MiEstimate> mi_estimates;
  std::vector<ContributionTable> contribution_tables;
  std::vector<RemovalLog> removal_logs;
};

FilterSequence filter_sequence(const Dataset& d, const FilterSchedule& schedule,
                               const TrainerConfig& trainer);

}  // namespace textbias
