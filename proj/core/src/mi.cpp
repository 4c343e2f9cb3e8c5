#include "textbias/mi.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "textbias/errors.hpp"
#include "textbias/rng.hpp"

namespace textbias {

double entropy_nats(std::span<const std::int64_t> counts) {
  std::int64_t total = 0;
  for (std::int64_t c : counts) {
    if (c < 0) throw DataError("negative count in entropy");
    total += c;
  }
  if (total == 0) throw DataError("entropy of an empty distribution");
  double h = 0.0;
  for (std::int64_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h < 0.0 ? 0.0 : h;
}

double plug_in_mi(const ContingencyTable& t) {
  if (t.rows == 0 || t.cols == 0 || t.total() == 0) {
    throw DataError("plug-in mutual information of an empty table");
  }
  const std::int64_t total = t.total();
  std::vector<std::int64_t> row_totals(t.rows), col_totals(t.cols);
  for (std::size_t r = 0; r < t.rows; ++r) row_totals[r] = t.row_total(r);
  for (std::size_t c = 0; c < t.cols; ++c) col_totals[c] = t.col_total(c);

  double mi = 0.0;
  for (std::size_t r = 0; r < t.rows; ++r) {
    for (std::size_t c = 0; c < t.cols; ++c) {
      const std::int64_t n = t.at(r, c);
      if (n == 0) continue;
      // The ratio is formed from integer products so that proportional rows
      // give log(1.0) = 0.0 exactly, not a rounding residue.
      const double ratio = (static_cast<double>(n) * static_cast<double>(total)) /
                           (static_cast<double>(row_totals[r]) * static_cast<double>(col_totals[c]));
      const double p = static_cast<double>(n) / static_cast<double>(total);
      mi += p * std::log(ratio);
    }
  }
  // Guard against rounding slightly past zero for independent tables.
  return mi < 0.0 && mi > -1e-12 ? 0.0 : mi;
}

std::vector<int> fold_assignment(const Dataset& d, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw ConfigError("n_folds must be at least 2");
  if (d.size() < static_cast<std::size_t>(n_folds)) {
    throw DataError("dataset smaller than the number of folds");
  }
  auto cells = cell_indices(d);
  Rng rng(seed);
  std::vector<int> fold(d.size(), 0);
  std::size_t dealt = 0;
  for (std::size_t y = 0; y < d.num_labels(); ++y) {
    for (std::size_t s = 0; s < d.num_nuisances(); ++s) {
      auto& cell = cells[y][s];
      rng.shuffle(cell);
      for (std::size_t i : cell) {
        fold[i] = static_cast<int>(dealt % static_cast<std::size_t>(n_folds));
        ++dealt;
      }
    }
  }
  return fold;
}

ContributionTable contributions(const Dataset& d, int n_folds, const TrainerConfig& trainer,
                                std::uint64_t seed) {
  const std::vector<int> fold = fold_assignment(d, n_folds, seed);
  const std::size_t n_nuisances = d.num_nuisances();
  if (n_nuisances < 2) throw DataError("need at least two nuisance values");

  ContributionTable table;
  table.n_folds = n_folds;
  table.entries.resize(d.size());
  table.fold_entropies.resize(static_cast<std::size_t>(n_folds));

  std::vector<std::int64_t> marginal(n_nuisances, 0);
  for (const Sample& s : d.samples()) ++marginal[static_cast<std::size_t>(s.nuisance)];
  table.marginal_entropy = entropy_nats(marginal);

  for (int f = 0; f < n_folds; ++f) {
    std::vector<std::string_view> texts;
    std::vector<int> targets;
    std::vector<std::int64_t> complement_counts(n_nuisances, 0);
    std::vector<std::size_t> held;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (fold[i] == f) {
        held.push_back(i);
        continue;
      }
      texts.push_back(d.samples()[i].text);
      targets.push_back(d.samples()[i].nuisance);
      ++complement_counts[static_cast<std::size_t>(d.samples()[i].nuisance)];
    }
    if (texts.empty() || held.empty()) {
      throw DataError("fold " + std::to_string(f) + " is degenerate");
    }
    const double h_fold = entropy_nats(complement_counts);
    table.fold_entropies[static_cast<std::size_t>(f)] = h_fold;

    const TrainedClassifier model =
        train_text_classifier(texts, targets, d.nuisance_space(), trainer,
                              derived_seed(seed, static_cast<std::uint64_t>(f) + 1));
    for (std::size_t i : held) {
      const std::vector<double> logp = predict_logprobs(model, d.samples()[i].text);
      ContributionEntry& e = table.entries[i];
      e.sample_index = i;
      e.fold = f;
      e.contribution = h_fold + logp[static_cast<std::size_t>(d.samples()[i].nuisance)];
    }
  }
  return table;
}

MiEstimate estimate_mi(const ContributionTable& t) {
  if (t.entries.empty()) throw DataError("no contributions to average");
  MiEstimate e;
  e.n_folds = t.n_folds;
  double sum = 0.0, entropy_sum = 0.0;
  for (const ContributionEntry& entry : t.entries) {
    sum += entry.contribution;
    entropy_sum += t.fold_entropies[static_cast<std::size_t>(entry.fold)];
  }
  const double n = static_cast<double>(t.entries.size());
  e.value = sum / n;
  e.entropy_term = entropy_sum / n;
  e.cross_entropy_term = e.entropy_term - e.value;
  return e;
}

void write_contributions_csv(const ContributionTable& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << "sample_index,fold,contribution\n";
  char buf[64];
  for (const ContributionEntry& e : t.entries) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.contribution);
    out << e.sample_index << ',' << e.fold << ',' << buf << '\n';
  }
  if (!out) throw ConfigError("failed writing " + path);
}

}  // namespace textbias
