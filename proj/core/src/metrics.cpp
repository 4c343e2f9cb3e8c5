#include "textbias/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "textbias/errors.hpp"
#include "textbias/rng.hpp"

namespace textbias {

namespace {

// Favored label of every bias-table column: the argmax over rows, -1 when the
// column is empty, -2 when tied. Errors are deferred until a sample actually
// needs the column.
std::vector<int> column_argmax(const ContingencyTable& t) {
  std::vector<int> result(t.cols, -1);
  for (std::size_t c = 0; c < t.cols; ++c) {
    std::int64_t best = -1;
    int best_row = -1;
    bool tied = false;
    for (std::size_t r = 0; r < t.rows; ++r) {
      const std::int64_t n = t.at(r, c);
      if (n > best) {
        best = n;
        best_row = static_cast<int>(r);
        tied = false;
      } else if (n == best) {
        tied = true;
      }
    }
    if (t.col_total(c) == 0) {
      result[c] = -1;
    } else {
      result[c] = tied ? -2 : best_row;
    }
  }
  return result;
}

}  // namespace

double discrimination(const std::vector<int>& predictions, const Dataset& d,
                      const ContingencyTable& bias_table, int y) {
  if (predictions.size() != d.size()) {
    throw DataError("predictions and dataset differ in length");
  }
  if (d.empty()) throw DataError("cannot measure discrimination on an empty dataset");
  if (y < 0 || static_cast<std::size_t>(y) >= bias_table.rows) {
    throw ConfigError("label index out of range of the bias table");
  }
  if (d.num_nuisances() > bias_table.cols) {
    throw DataError("bias table has fewer nuisance values than the dataset");
  }
  const std::vector<int> favored = column_argmax(bias_table);

  std::int64_t n_protected = 0, n_other = 0, hits_protected = 0, hits_other = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t s = static_cast<std::size_t>(d.samples()[i].nuisance);
    if (favored[s] == -1) {
      throw DataError("nuisance '" + d.nuisance_space()[s] + "' is absent from the bias table");
    }
    if (favored[s] == -2) {
      throw DataError("bias table ties on nuisance '" + d.nuisance_space()[s] +
                      "': protected group is ambiguous");
    }
    const bool in_protected = favored[s] == y;
    const bool hit = predictions[i] == y;
    if (in_protected) {
      ++n_protected;
      hits_protected += hit;
    } else {
      ++n_other;
      hits_other += hit;
    }
  }
  if (n_protected == 0 || n_other == 0) {
    throw DataError("one side of the protected grouping is empty for label " + std::to_string(y));
  }
  const double rate_protected =
      static_cast<double>(hits_protected) / static_cast<double>(n_protected);
  const double rate_other = static_cast<double>(hits_other) / static_cast<double>(n_other);
  return std::abs(rate_protected - rate_other);
}

double disc_ratio(double disc, double beta) {
  if (beta <= 0.5 || beta > 1.0) {
    throw ConfigError("disc_ratio needs beta in (0.5, 1]");
  }
  return 100.0 * disc / (2.0 * beta - 1.0);
}

std::vector<int> predict_labels(const TrainedClassifier& m, const Dataset& d) {
  std::vector<int> out;
  out.reserve(d.size());
  for (const Sample& s : d.samples()) out.push_back(predict(m, s.text).target);
  return out;
}

namespace {

MetricReport accuracy_pair(const TrainedClassifier& m, const SplitResult& sr) {
  MetricReport r;
  r.acc_same = accuracy(m, sr.test_same);
  r.acc_shifted = accuracy(m, sr.test_shifted);
  if (r.acc_same <= 0.0) {
    throw DataError("test_same accuracy is zero; normalized score undefined");
  }
  r.normalized = 100.0 * r.acc_shifted / r.acc_same;
  return r;
}

}  // namespace

MetricReport gtb_metric(const TrainedClassifier& m, const SplitResult& sr) {
  if (!std::holds_alternative<GtbPlan>(sr.plan)) {
    throw DataError("expected a training-bias split");
  }
  const GtbPlan& plan = std::get<GtbPlan>(sr.plan);
  MetricReport r = accuracy_pair(m, sr);
  r.context.kind = MetricKind::Gtb;
  r.context.beta = plan.beta;
  r.context.seed = plan.seed;
  if (plan.beta > 0.5) {
    const ContingencyTable bias_table = contingency(sr.train);
    const std::vector<int> predictions = predict_labels(m, sr.test_same);
    for (std::size_t y = 0; y < sr.train.num_labels(); ++y) {
      const double disc = discrimination(predictions, sr.test_same, bias_table,
                                         static_cast<int>(y));
      r.disc[static_cast<int>(y)] = disc;
      r.disc_ratio[static_cast<int>(y)] = disc_ratio(disc, plan.beta);
    }
  }
  return r;
}

MetricReport gu_metric(const TrainedClassifier& m, const SplitResult& sr) {
  if (!std::holds_alternative<GuPlan>(sr.plan)) {
    throw DataError("expected a group-unseen split");
  }
  MetricReport r = accuracy_pair(m, sr);
  r.context.kind = MetricKind::Gu;
  r.context.seed = std::get<GuPlan>(sr.plan).seed;
  return r;
}

double probe_identifiability(const std::vector<std::vector<double>>& reps,
                             const std::vector<int>& targets,
                             std::vector<std::string> target_space, const ProbeConfig& cfg,
                             double* majority) {
  auto [train_idx, eval_idx] = stratified_holdout(targets, 0.2, derived_seed(cfg.seed, 1));
  if (train_idx.empty() || eval_idx.empty()) {
    throw DataError("probe holdout left an empty side");
  }
  std::vector<std::vector<double>> train_reps, eval_reps;
  std::vector<int> train_targets, eval_targets;
  for (std::size_t i : train_idx) {
    train_reps.push_back(reps[i]);
    train_targets.push_back(targets[i]);
  }
  for (std::size_t i : eval_idx) {
    eval_reps.push_back(reps[i]);
    eval_targets.push_back(targets[i]);
  }
  if (majority) {
    std::vector<std::int64_t> counts(target_space.size(), 0);
    for (int t : eval_targets) ++counts[static_cast<std::size_t>(t)];
    const std::int64_t top = *std::max_element(counts.begin(), counts.end());
    *majority = 100.0 * static_cast<double>(top) / static_cast<double>(eval_targets.size());
  }
  const TrainedProbe probe = train_probe(train_reps, train_targets, std::move(target_space), cfg);
  return 100.0 * probe_accuracy(probe, eval_reps, eval_targets);
}

double identifiability_gtb(const TrainedClassifier& m, const SplitResult& sr,
                           const ProbeConfig& cfg, double* majority) {
  const Dataset& train = sr.train;
  if (train.empty()) throw DataError("empty training set");
  // Compact target space: only sources that actually occur in train.
  std::vector<int> compact(train.num_nuisances(), -1);
  std::vector<std::string> target_space;
  for (std::size_t s = 0; s < train.num_nuisances(); ++s) {
    std::int64_t total = 0;
    for (std::size_t y = 0; y < train.num_labels(); ++y) {
      total += train.count(static_cast<int>(y), static_cast<int>(s));
    }
    if (total > 0) {
      compact[s] = static_cast<int>(target_space.size());
      target_space.push_back(train.nuisance_space()[s]);
    }
  }
  if (target_space.size() < 2) throw DataError("need at least two sources to probe");

  std::vector<std::vector<double>> reps;
  std::vector<int> targets;
  reps.reserve(train.size());
  targets.reserve(train.size());
  for (const Sample& s : train.samples()) {
    reps.push_back(represent(m, s.text));
    targets.push_back(compact[static_cast<std::size_t>(s.nuisance)]);
  }
  return probe_identifiability(reps, targets, std::move(target_space), cfg, majority);
}

double identifiability_gu(const TrainedClassifier& m, const SplitResult& sr,
                          const ProbeConfig& cfg, double* majority) {
  if (!std::holds_alternative<GuPlan>(sr.plan)) {
    throw DataError("expected a group-unseen split");
  }
  std::vector<std::vector<double>> seen, unseen;
  for (const Dataset* d : {&sr.train, &sr.test_same}) {
    for (const Sample& s : d->samples()) seen.push_back(represent(m, s.text));
  }
  for (const Sample& s : sr.test_shifted.samples()) unseen.push_back(represent(m, s.text));
  if (seen.empty() || unseen.empty()) throw DataError("one membership side is empty");

  // Balance the two sides so the probe cannot score above 50 from priors.
  const std::size_t keep = std::min(seen.size(), unseen.size());
  Rng rng(derived_seed(cfg.seed, 0));
  auto downsample = [&](std::vector<std::vector<double>>& side) {
    if (side.size() == keep) return;
    std::vector<std::size_t> chosen = rng.sample_indices(side.size(), keep);
    std::sort(chosen.begin(), chosen.end());
    std::vector<std::vector<double>> kept;
    kept.reserve(keep);
    for (std::size_t i : chosen) kept.push_back(std::move(side[i]));
    side = std::move(kept);
  };
  downsample(seen);
  downsample(unseen);

  std::vector<std::vector<double>> reps;
  std::vector<int> targets;
  reps.reserve(2 * keep);
  targets.reserve(2 * keep);
  for (auto& r : seen) {
    reps.push_back(std::move(r));
    targets.push_back(0);
  }
  for (auto& r : unseen) {
    reps.push_back(std::move(r));
    targets.push_back(1);
  }
  return probe_identifiability(reps, targets, {"seen", "unseen"}, cfg, majority);
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::vector<MetricReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << "dataset,iteration,metric_kind,beta_or_seed,acc_same,acc_shifted,normalized,"
         "disc,disc_ratio,identifiability,majority_baseline\n";
  for (const MetricReport& r : reports) {
    out << r.context.dataset << ',';
    if (r.context.iteration >= 0) out << r.context.iteration;
    out << ',';
    out << (r.context.kind == MetricKind::Gtb ? "gtb" : "gu") << ',';
    if (r.context.kind == MetricKind::Gtb) {
      out << format_double(r.context.beta);
    } else {
      out << r.context.seed;
    }
    out << ',' << format_double(r.acc_same) << ',' << format_double(r.acc_shifted) << ','
        << format_double(r.normalized) << ',';
    if (auto it = r.disc.find(1); it != r.disc.end()) out << format_double(it->second);
    out << ',';
    if (auto it = r.disc_ratio.find(1); it != r.disc_ratio.end()) out << format_double(it->second);
    out << ',';
    if (r.identifiability >= 0.0) out << format_double(r.identifiability);
    out << ',';
    if (r.majority_baseline >= 0.0) out << format_double(r.majority_baseline);
    out << '\n';
  }
  if (!out) throw ConfigError("failed writing " + path);
}

}  // namespace textbias
