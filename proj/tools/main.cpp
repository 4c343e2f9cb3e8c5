// Command-line front end for the dataset construction and evaluation library.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "textbias/corpus.hpp"
#include "textbias/errors.hpp"
#include "textbias/experiment.hpp"
#include "textbias/filtering.hpp"
#include "textbias/metrics.hpp"
#include "textbias/mi.hpp"
#include "textbias/probe.hpp"
#include "textbias/rng.hpp"
#include "textbias/splits.hpp"
#include "textbias/synth.hpp"
#include "textbias/textmodel.hpp"

namespace {

using namespace textbias;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

void add_trainer_options(CLI::App* cmd, TrainerConfig& trainer) {
  cmd->add_option("--dim", trainer.dim, "Embedding dimension");
  cmd->add_option("--lr", trainer.learning_rate, "Initial learning rate");
  cmd->add_option("--epochs", trainer.epochs, "Training epochs");
  cmd->add_option("--buckets", trainer.featurizer.bucket_count, "Hash bucket count");
  cmd->add_flag("--no-bigrams", [&trainer](std::int64_t) { trainer.featurizer.use_bigrams = false; },
                "Use unigram features only");
  cmd->add_flag("--no-lowercase", [&trainer](std::int64_t) { trainer.featurizer.lowercase = false; },
                "Keep the original letter case");
}

void add_probe_options(CLI::App* cmd, ProbeConfig& probe) {
  cmd->add_option("--hidden1", probe.hidden1, "First hidden layer width");
  cmd->add_option("--hidden2", probe.hidden2, "Second hidden layer width");
  cmd->add_option("--probe-epochs", probe.epochs, "Probe training epochs");
  cmd->add_option("--batch-size", probe.batch_size, "Probe minibatch size");
  cmd->add_option("--adam-step", probe.adam.step, "Adam step size");
  cmd->add_option("--probe-seed", probe.seed, "Probe seed");
}

Dataset read_input(const std::string& path, const std::string& format,
                   const ReviewFields& fields) {
  if (format == "labeled") return read_labeled_jsonl(path);
  if (format == "reviews") return ingest_reviews(path, fields);
  if (format != "auto") throw ConfigError("unknown format '" + format + "'");
  // auto: peek for the canonical field pair
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line.find("\"label\"") != std::string::npos &&
        line.find("\"nuisance\"") != std::string::npos) {
      return read_labeled_jsonl(path);
    }
    break;
  }
  return ingest_reviews(path, fields);
}

void print_table(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> widths;
  for (const auto& row : cells) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) {
      widths[c] = std::max(widths[c], row[c].size());
    }
  }
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::string cell = row[c];
      cell.resize(widths[c], ' ');
      line += cell;
      if (c + 1 < row.size()) line += "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    std::cout << line << '\n';
  }
}

void print_csv_file(const std::string& path, const std::string& title) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<std::vector<std::string>> cells;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.push_back("");
    cells.push_back(std::move(row));
  }
  std::cout << title << "\n";
  print_table(cells);
  std::cout << '\n';
}

void print_eval_report(const MetricReport& r) {
  std::cout << "acc_same        " << fmt(r.acc_same) << '\n';
  std::cout << "acc_shifted     " << fmt(r.acc_shifted) << '\n';
  std::cout << "normalized      " << fmt(r.normalized) << '\n';
  for (const auto& [label, value] : r.disc) {
    std::cout << "disc[" << label << "]         " << fmt(value) << '\n';
  }
  for (const auto& [label, value] : r.disc_ratio) {
    std::cout << "disc_ratio[" << label << "]   " << fmt(value) << '\n';
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Controlled-bias text dataset construction and evaluation"};
  app.require_subcommand(1);

  // ---- ingest ----
  auto* ingest = app.add_subcommand("ingest", "Convert a raw corpus to canonical JSON Lines");
  std::string in_path, out_path, format = "auto";
  ReviewFields fields;
  std::size_t top_k = 0;
  bool do_balance = false;
  std::uint64_t seed = 0;
  ingest->add_option("--input", in_path, "Input JSON-Lines file")->required();
  ingest->add_option("--output", out_path, "Output JSON-Lines file")->required();
  ingest->add_option("--format", format, "auto, reviews or labeled");
  ingest->add_option("--rating-field", fields.rating, "Rating field (default: stars, then overall)");
  ingest->add_option("--nuisance-field", fields.nuisance,
                     "Nuisance field (default: business_id, then asin)");
  ingest->add_option("--text-field", fields.text, "Text field (default: text)");
  ingest->add_option("--top-k", top_k, "Keep only the k most frequent nuisance values");
  ingest->add_flag("--balance", do_balance, "Balance labels per nuisance value");
  ingest->add_option("--seed", seed, "Seed for balancing");
  ingest->callback([&] {
    Dataset d = read_input(in_path, format, fields);
    if (top_k > 0 && top_k < d.num_nuisances()) d = select_top_nuisances(d, top_k);
    if (do_balance) d = balance_labels(d, seed);
    write_jsonl(d, out_path);
    std::cout << d.size() << " samples, " << d.num_labels() << " labels, " << d.num_nuisances()
              << " nuisance values -> " << out_path << '\n';
  });

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted signal");
  SynthSpec spec;
  std::string synth_out;
  synth->add_option("--output", synth_out, "Output JSON-Lines file")->required();
  synth->add_option("--sources", spec.n_sources, "Number of nuisance values");
  synth->add_option("--labels", spec.n_labels, "Number of labels");
  synth->add_option("--per-cell", spec.per_cell, "Samples per (label, nuisance) cell");
  synth->add_option("--label-signal", spec.label_signal, "P(label token present)");
  synth->add_option("--nuisance-signal", spec.nuisance_signal, "P(source token present)");
  synth->add_option("--background-tokens", spec.background_tokens, "Background tokens per text");
  synth->add_option("--background-vocab", spec.background_vocab, "Background vocabulary size");
  synth->add_option("--seed", spec.seed, "Generation seed");
  synth->callback([&] {
    Dataset d = synth_generate(spec);
    write_jsonl(d, synth_out);
    std::cout << d.size() << " samples -> " << synth_out << '\n';
  });

  // ---- filter ----
  auto* filter = app.add_subcommand("filter", "Build nested subsets by rejection filtering");
  std::string filter_in, filter_out_dir;
  FilterSchedule schedule;
  TrainerConfig filter_trainer;
  filter->add_option("--input", filter_in, "Balanced JSON-Lines corpus")->required();
  filter->add_option("--output-dir", filter_out_dir, "Directory for subsets")->required();
  filter->add_option("--alphas", schedule.alphas, "Rejection quantile per iteration")
      ->expected(-1);
  filter->add_option("--folds", schedule.n_folds, "Out-of-fold count");
  filter->add_option("--seed", schedule.seed, "Filtering seed");
  add_trainer_options(filter, filter_trainer);
  filter->callback([&] {
    if (schedule.alphas.empty()) schedule.alphas = {0.25, 1.0 / 3.0};
    Dataset d = read_labeled_jsonl(filter_in);
    FilterSequence seq = filter_sequence(d, schedule, filter_trainer);
    std::filesystem::create_directories(filter_out_dir);
    std::vector<std::vector<std::string>> table{
        {"subset", "size", "mi", "entropy", "cross_entropy", "removed"}};
    for (std::size_t i = 0; i < seq.subsets.size(); ++i) {
      const std::string name = "D" + std::to_string(i);
      write_jsonl(seq.subsets[i], filter_out_dir + "/" + name + ".jsonl");
      write_contributions_csv(seq.contribution_tables[i],
                              filter_out_dir + "/contributions_" + name + ".csv");
      const MiEstimate& e = seq.mi_estimates[i];
      table.push_back({name, std::to_string(seq.subsets[i].size()), fmt(e.value),
                       fmt(e.entropy_term), fmt(e.cross_entropy_term),
                       i < seq.removal_logs.size()
                           ? std::to_string(seq.removal_logs[i].total_removed)
                           : ""});
    }
    print_table(table);
  });

  // ---- split ----
  auto* split = app.add_subcommand("split", "Build a robustness split");
  split->require_subcommand(1);
  std::string split_in, split_dir;
  double beta = 0.7, test_fraction = 0.2, holdout_fraction = 0.2;
  std::size_t k_unknown = 0;
  std::uint64_t split_seed = 0;

  auto* split_gtb = split->add_subcommand("gtb", "Training-bias split");
  split_gtb->add_option("--input", split_in, "Balanced JSON-Lines corpus")->required();
  split_gtb->add_option("--output-dir", split_dir, "Directory for the split")->required();
  split_gtb->add_option("--beta", beta, "Bias strength in [0.5, 1]")->required();
  split_gtb->add_option("--test-fraction", test_fraction, "Held-out fraction");
  split_gtb->add_option("--seed", split_seed, "Split seed");
  split_gtb->callback([&] {
    Dataset d = read_labeled_jsonl(split_in);
    SplitResult sr = gtb_split(d, beta, split_seed, test_fraction);
    write_split_dir(sr, split_dir);
    std::cout << "train " << sr.train.size() << ", test_shifted " << sr.test_shifted.size()
              << ", test_same " << sr.test_same.size() << " -> " << split_dir << '\n';
  });

  auto* split_gu = split->add_subcommand("gu", "Group-unseen split");
  split_gu->add_option("--input", split_in, "JSON-Lines corpus")->required();
  split_gu->add_option("--output-dir", split_dir, "Directory for the split")->required();
  split_gu->add_option("--k", k_unknown, "Number of unseen nuisance values")->required();
  split_gu->add_option("--holdout-fraction", holdout_fraction, "test_same fraction");
  split_gu->add_option("--seed", split_seed, "Split seed");
  split_gu->callback([&] {
    Dataset d = read_labeled_jsonl(split_in);
    SplitResult sr = gu_split(d, k_unknown, split_seed, holdout_fraction);
    write_split_dir(sr, split_dir);
    std::cout << "train " << sr.train.size() << ", test_shifted " << sr.test_shifted.size()
              << ", test_same " << sr.test_same.size() << " -> " << split_dir << '\n';
  });

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "Train the reference classifier");
  std::string train_in, model_out, target = "label";
  TrainerConfig trainer;
  std::uint64_t train_seed = 0;
  train_cmd->add_option("--input", train_in, "Training JSON-Lines file")->required();
  train_cmd->add_option("--output", model_out, "Model file to write")->required();
  train_cmd->add_option("--target", target, "label or nuisance");
  train_cmd->add_option("--seed", train_seed, "Training seed");
  add_trainer_options(train_cmd, trainer);
  train_cmd->callback([&] {
    Dataset d = read_labeled_jsonl(train_in);
    TrainedClassifier model;
    std::size_t skipped = 0;
    if (target == "label") {
      model = train(d, trainer, train_seed, &skipped);
    } else if (target == "nuisance") {
      std::vector<std::string_view> texts;
      std::vector<int> targets;
      for (const Sample& s : d.samples()) {
        texts.push_back(s.text);
        targets.push_back(s.nuisance);
      }
      model = train_text_classifier(texts, targets, d.nuisance_space(), trainer, train_seed,
                                    &skipped);
    } else {
      throw ConfigError("--target must be label or nuisance");
    }
    save_classifier(model, model_out);
    std::cout << "trained on " << d.size() - skipped << " samples (" << skipped
              << " skipped) -> " << model_out << '\n';
  });

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "Evaluate a model against a split");
  eval->require_subcommand(1);
  std::string eval_model, eval_split_dir, eval_csv;
  auto add_eval = [&](const char* name, const char* help, MetricKind kind) {
    auto* cmd = eval->add_subcommand(name, help);
    cmd->add_option("--model", eval_model, "Classifier file")->required();
    cmd->add_option("--split-dir", eval_split_dir, "Split directory")->required();
    cmd->add_option("--csv", eval_csv, "Also append the report to this CSV");
    cmd->callback([&, kind] {
      const TrainedClassifier model = load_classifier(eval_model);
      const SplitResult sr = load_split_dir(eval_split_dir);
      MetricReport r = kind == MetricKind::Gtb ? gtb_metric(model, sr) : gu_metric(model, sr);
      print_eval_report(r);
      if (!eval_csv.empty()) write_metrics_csv({r}, eval_csv);
    });
  };
  add_eval("gtb", "Training-bias metrics", MetricKind::Gtb);
  add_eval("gu", "Group-unseen metrics", MetricKind::Gu);

  // ---- probe ----
  auto* probe_cmd = app.add_subcommand("probe", "Measure identifiability with an MLP probe");
  probe_cmd->require_subcommand(1);
  std::string probe_model, probe_split_dir;
  ProbeConfig probe_cfg;
  auto add_probe = [&](const char* name, const char* help, bool gtb) {
    auto* cmd = probe_cmd->add_subcommand(name, help);
    cmd->add_option("--model", probe_model, "Classifier file")->required();
    cmd->add_option("--split-dir", probe_split_dir, "Split directory")->required();
    add_probe_options(cmd, probe_cfg);
    cmd->callback([&, gtb] {
      const TrainedClassifier model = load_classifier(probe_model);
      const SplitResult sr = load_split_dir(probe_split_dir);
      double majority = -1.0;
      const double ident = gtb ? identifiability_gtb(model, sr, probe_cfg, &majority)
                               : identifiability_gu(model, sr, probe_cfg, &majority);
      std::cout << "identifiability    " << fmt(ident) << '\n';
      std::cout << "majority_baseline  " << fmt(majority) << '\n';
    });
  };
  add_probe("gtb", "Source identifiability from train representations", true);
  add_probe("gu", "Seen/unseen membership identifiability", false);

  // ---- report ----
  auto* report = app.add_subcommand("report", "Print the summary tables of a finished run");
  std::string run_dir;
  report->add_option("--run-dir", run_dir, "Experiment output directory")->required();
  report->callback([&] {
    print_csv_file(run_dir + "/subset_mi.csv", "Subsets");
    print_csv_file(run_dir + "/gtb_by_beta.csv", "Training-bias sweep");
    print_csv_file(run_dir + "/gu_summary.csv", "Group-unseen summary");
  });

  // ---- run ----
  auto* run = app.add_subcommand("run", "Run the full pipeline from a config file");
  std::string config_path, output_override;
  std::uint64_t master_override = 0;
  bool has_master_override = false;
  run->add_option("--config", config_path, "Experiment config JSON")->required();
  run->add_option("--output-dir", output_override, "Override the output directory");
  run->add_option("--master-seed", master_override, "Override the master seed")
      ->each([&](const std::string&) { has_master_override = true; });
  run->callback([&] {
    ExperimentConfig cfg = load_config(config_path);
    if (!output_override.empty()) cfg.output_dir = output_override;
    if (has_master_override) cfg.master_seed = master_override;
    run_experiment(cfg);
    print_csv_file(cfg.output_dir + "/subset_mi.csv", "Subsets");
    print_csv_file(cfg.output_dir + "/gtb_by_beta.csv", "Training-bias sweep");
    print_csv_file(cfg.output_dir + "/gu_summary.csv", "Group-unseen summary");
    std::cout << "outputs in " << cfg.output_dir << '\n';
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
