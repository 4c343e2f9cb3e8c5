#include "textbias/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "textbias/errors.hpp"
#include "textbias/rng.hpp"

namespace textbias {

double empirical_quantile(std::vector<double> values, double alpha) {
  if (values.empty()) throw DataError("quantile of an empty list");
  if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("alpha must be in (0, 1)");
  std::sort(values.begin(), values.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::floor(alpha * static_cast<double>(values.size() - 1)));
  return values[rank];
}

std::pair<Dataset, RemovalLog> reject_iteration(const Dataset& d, double alpha,
                                                const ContributionTable& ct) {
  if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("alpha must be in (0, 1)");
  if (d.empty()) throw DataError("cannot filter an empty dataset");
  if (ct.entries.size() != d.size()) {
    throw DataError("contribution table covers " + std::to_string(ct.entries.size()) +
                    " samples but the dataset has " + std::to_string(d.size()));
  }
  for (std::size_t i = 0; i < ct.entries.size(); ++i) {
    if (ct.entries[i].sample_index != i) {
      throw DataError("contribution table does not match the dataset");
    }
  }
  const std::size_t n_labels = d.num_labels();
  const std::size_t n_nuisances = d.num_nuisances();
  for (std::size_t s = 0; s < n_nuisances; ++s) {
    const std::int64_t first = d.count(0, static_cast<int>(s));
    for (std::size_t y = 1; y < n_labels; ++y) {
      if (d.count(static_cast<int>(y), static_cast<int>(s)) != first) {
        throw DataError("nuisance '" + d.nuisance_space()[s] + "' is not label-balanced");
      }
    }
  }

  std::vector<double> all(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) all[i] = ct.entries[i].contribution;
  const double eps = empirical_quantile(all, alpha);

  const auto cells = cell_indices(d);
  RemovalLog log;
  log.alpha = alpha;
  log.epsilon = eps;
  log.removed_per_cell.assign(n_labels * n_nuisances, 0);

  std::vector<char> removed(d.size(), 0);
  for (std::size_t s = 0; s < n_nuisances; ++s) {
    std::int64_t n_s = std::numeric_limits<std::int64_t>::max();
    for (std::size_t y = 0; y < n_labels; ++y) {
      std::int64_t below = 0;
      for (std::size_t i : cells[y][s]) {
        if (ct.entries[i].contribution < eps) ++below;
      }
      n_s = std::min(n_s, below);
    }
    if (n_labels == 0 || n_s == std::numeric_limits<std::int64_t>::max()) n_s = 0;
    if (n_s == 0) continue;
    for (std::size_t y = 0; y < n_labels; ++y) {
      std::vector<std::size_t> order = cells[y][s];
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ca = ct.entries[a].contribution;
        const double cb = ct.entries[b].contribution;
        if (ca != cb) return ca < cb;
        return a < b;
      });
      for (std::int64_t k = 0; k < n_s; ++k) removed[order[static_cast<std::size_t>(k)]] = 1;
      log.removed_per_cell[y * n_nuisances + s] = n_s;
      log.total_removed += n_s;
    }
  }

  std::vector<std::size_t> kept;
  kept.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!removed[i]) kept.push_back(i);
  }
  return {take_samples(d, kept), std::move(log)};
}

FilterSequence filter_sequence(const Dataset& d, const FilterSchedule& schedule,
                               const TrainerConfig& trainer) {
  if (schedule.alphas.empty()) throw ConfigError("schedule needs at least one alpha");
  for (double a : schedule.alphas) {
    if (a <= 0.0 || a >= 1.0) throw ConfigError("alpha must be in (0, 1)");
  }

  FilterSequence seq;
  seq.subsets.push_back(d);
  for (std::size_t it = 0; it < schedule.alphas.size(); ++it) {
    const Dataset& current = seq.subsets.back();
    ContributionTable ct =
        contributions(current, schedule.n_folds, trainer, derived_seed(schedule.seed, it));
    seq.mi_estimates.push_back(estimate_mi(ct));
    auto [next, log] = reject_iteration(current, schedule.alphas[it], ct);
    seq.contribution_tables.push_back(std::move(ct));
    seq.removal_logs.push_back(std::move(log));
    seq.subsets.push_back(std::move(next));
  }
  // The last subset still needs its own MI estimate.
  ContributionTable ct = contributions(seq.subsets.back(), schedule.n_folds, trainer,
                                       derived_seed(schedule.seed, schedule.alphas.size()));
  seq.mi_estimates.push_back(estimate_mi(ct));
  seq.contribution_tables.push_back(std::move(ct));
  return seq;
}

}  // namespace textbias
