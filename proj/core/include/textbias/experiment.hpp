#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "textbias/corpus.hpp"
#include "textbias/filtering.hpp"
#include "textbias/metrics.hpp"
#include "textbias/probe.hpp"
#include "textbias/synth.hpp"
#include "textbias/textmodel.hpp"

namespace textbias {

// End-to-end pipeline: ingest (or synthesize), balance, filter into nested
// subsets, sweep the training-bias split over beta, repeat the group-unseen
// split over seeds, and write metrics plus a manifest that records every
// derived seed and split plan.

struct InputSpec {
  std::string path;              // JSON-Lines file; empty when synth is used
  std::string format = "auto";   // "auto", "reviews" or "labeled"
  ReviewFields review_fields;    // field names for the reviews format
};

struct ExperimentConfig {
  InputSpec input;
  std::optional<SynthSpec> synth;  // generate instead of reading input.path

  int k_top_nuisances = 50;        // 0 = keep all
  std::vector<double> alphas = {0.25, 1.0 / 3.0};
  int n_folds = 10;

  std::vector<double> betas = {0.6, 0.7, 0.8, 0.9, 1.0};
  double gtb_test_fraction = 0.2;

  int gu_seeds = 50;               // repetitions of the group-unseen split
  int probe_seeds = 10;            // repetitions of the membership probe
  std::size_t gu_k_unknown = 0;    // 0 = half the sources
  double gu_holdout_fraction = 0.2;

  TrainerConfig trainer;
  ProbeConfig probe;

  std::uint64_t master_seed = 0;
  std::string output_dir = "runs/out";
};

// Reads a config JSON file. Absent fields keep their defaults. If the
// TEXTBIAS_OUTPUT_DIR environment variable is set, it overrides output_dir.
ExperimentConfig load_config(const std::string& path);

// Effective config as JSON text (also embedded in the manifest).
std::string config_to_json(const ExperimentConfig& cfg);

struct ExperimentResult {
  std::vector<std::string> subset_names;
  std::vector<MiEstimate> subset_mi;
  std::vector<std::size_t> subset_sizes;
  std::vector<MetricReport> reports;
};

// Runs the full pipeline and writes into cfg.output_dir:
//   subsets/D<k>.jsonl, subsets/contributions_D<k>.csv, filter_state.json,
//   metrics.csv, subset_mi.csv, gtb_by_beta.csv, gu_summary.csv,
//   config.json, manifest.json
// A matching filter_state.json from an earlier run short-circuits the
// filtering stage. Errors are annotated with the failing stage; outputs
// computed before the failure are still written.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace textbias
