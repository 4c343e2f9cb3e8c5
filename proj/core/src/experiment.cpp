#include "textbias/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "textbias/errors.hpp"
#include "textbias/rng.hpp"
#include "textbias/splits.hpp"

namespace textbias {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& context) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return key == k; }) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + context);
    }
  }
}

std::uint64_t seed_from_json(const json& j) {
  if (j.is_string()) return std::stoull(j.get<std::string>());
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  throw ConfigError("seed must be a non-negative integer or a decimal string");
}

SynthSpec synth_from_json(const json& j) {
  check_keys(j,
             {"n_sources", "n_labels", "per_cell", "label_signal", "nuisance_signal",
              "background_tokens", "background_vocab", "seed"},
             "synth");
  SynthSpec s;
  s.n_sources = j.value("n_sources", s.n_sources);
  s.n_labels = j.value("n_labels", s.n_labels);
  s.per_cell = j.value("per_cell", s.per_cell);
  s.label_signal = j.value("label_signal", s.label_signal);
  s.nuisance_signal = j.value("nuisance_signal", s.nuisance_signal);
  s.background_tokens = j.value("background_tokens", s.background_tokens);
  s.background_vocab = j.value("background_vocab", s.background_vocab);
  if (j.contains("seed")) s.seed = seed_from_json(j.at("seed"));
  return s;
}

json synth_to_json(const SynthSpec& s) {
  json j;
  j["n_sources"] = s.n_sources;
  j["n_labels"] = s.n_labels;
  j["per_cell"] = s.per_cell;
  j["label_signal"] = s.label_signal;
  j["nuisance_signal"] = s.nuisance_signal;
  j["background_tokens"] = s.background_tokens;
  j["background_vocab"] = s.background_vocab;
  j["seed"] = s.seed;
  return j;
}

TrainerConfig trainer_from_json(const json& j) {
  check_keys(j, {"dim", "learning_rate", "epochs", "bucket_count", "use_bigrams", "lowercase"},
             "trainer");
  TrainerConfig t;
  t.dim = j.value("dim", t.dim);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.epochs = j.value("epochs", t.epochs);
  t.featurizer.bucket_count = j.value("bucket_count", t.featurizer.bucket_count);
  t.featurizer.use_bigrams = j.value("use_bigrams", t.featurizer.use_bigrams);
  t.featurizer.lowercase = j.value("lowercase", t.featurizer.lowercase);
  return t;
}

json trainer_to_json(const TrainerConfig& t) {
  json j;
  j["dim"] = t.dim;
  j["learning_rate"] = t.learning_rate;
  j["epochs"] = t.epochs;
  j["bucket_count"] = t.featurizer.bucket_count;
  j["use_bigrams"] = t.featurizer.use_bigrams;
  j["lowercase"] = t.featurizer.lowercase;
  return j;
}

ProbeConfig probe_from_json(const json& j) {
  check_keys(j,
             {"hidden1", "hidden2", "epochs", "batch_size", "adam_step", "adam_beta1",
              "adam_beta2", "adam_epsilon"},
             "probe");
  ProbeConfig p;
  p.hidden1 = j.value("hidden1", p.hidden1);
  p.hidden2 = j.value("hidden2", p.hidden2);
  p.epochs = j.value("epochs", p.epochs);
  p.batch_size = j.value("batch_size", p.batch_size);
  p.adam.step = j.value("adam_step", p.adam.step);
  p.adam.beta1 = j.value("adam_beta1", p.adam.beta1);
  p.adam.beta2 = j.value("adam_beta2", p.adam.beta2);
  p.adam.epsilon = j.value("adam_epsilon", p.adam.epsilon);
  return p;
}

json probe_to_json(const ProbeConfig& p) {
  json j;
  j["hidden1"] = p.hidden1;
  j["hidden2"] = p.hidden2;
  j["epochs"] = p.epochs;
  j["batch_size"] = p.batch_size;
  j["adam_step"] = p.adam.step;
  j["adam_beta1"] = p.adam.beta1;
  j["adam_beta2"] = p.adam.beta2;
  j["adam_epsilon"] = p.adam.epsilon;
  return j;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return r;
}

// Content fingerprint used to decide whether an existing filter_state.json
// belongs to this input.
std::string dataset_digest(const Dataset& d) {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&](const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(data[i]);
      h *= 1099511628211ULL;
    }
  };
  auto mix_str = [&](const std::string& s) { mix(s.data(), s.size()); };
  for (const Sample& s : d.samples()) {
    mix_str(s.text);
    mix("\x1e", 1);
    const std::string label = std::to_string(s.label);
    mix_str(label);
    mix("\x1e", 1);
    mix_str(d.nuisance_space()[static_cast<std::size_t>(s.nuisance)]);
    mix("\x1f", 1);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Rebinds a freshly parsed dataset to the recorded spaces so a resumed run
// sees bit-identical state.
Dataset adopt_spaces(const Dataset& raw, const std::vector<std::string>& label_space,
                     const std::vector<std::string>& nuisance_space) {
  std::unordered_map<std::string, int> index;
  for (std::size_t s = 0; s < nuisance_space.size(); ++s) {
    index.emplace(nuisance_space[s], static_cast<int>(s));
  }
  std::vector<Sample> samples = raw.samples();
  for (Sample& s : samples) {
    const std::string& name = raw.nuisance_space()[static_cast<std::size_t>(s.nuisance)];
    auto it = index.find(name);
    if (it == index.end()) throw DataError("unknown nuisance '" + name + "' in stored subset");
    s.nuisance = it->second;
  }
  return Dataset(std::move(samples), label_space, nuisance_space);
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  check_keys(j,
             {"input", "synth", "k_top_nuisances", "alphas", "n_folds", "betas",
              "gtb_test_fraction", "gu_seeds", "probe_seeds", "gu_k_unknown",
              "gu_holdout_fraction", "trainer", "probe", "master_seed", "output_dir"},
             "config");
  ExperimentConfig cfg;
  if (j.contains("input")) {
    const json& ji = j.at("input");
    check_keys(ji, {"path", "format", "rating_field", "nuisance_field", "text_field"}, "input");
    cfg.input.path = ji.value("path", "");
    cfg.input.format = ji.value("format", "auto");
    cfg.input.review_fields.rating = ji.value("rating_field", "");
    cfg.input.review_fields.nuisance = ji.value("nuisance_field", "");
    cfg.input.review_fields.text = ji.value("text_field", "");
  }
  if (j.contains("synth")) cfg.synth = synth_from_json(j.at("synth"));
  cfg.k_top_nuisances = j.value("k_top_nuisances", cfg.k_top_nuisances);
  if (j.contains("alphas")) cfg.alphas = j.at("alphas").get<std::vector<double>>();
  cfg.n_folds = j.value("n_folds", cfg.n_folds);
  if (j.contains("betas")) cfg.betas = j.at("betas").get<std::vector<double>>();
  cfg.gtb_test_fraction = j.value("gtb_test_fraction", cfg.gtb_test_fraction);
  cfg.gu_seeds = j.value("gu_seeds", cfg.gu_seeds);
  cfg.probe_seeds = j.value("probe_seeds", cfg.probe_seeds);
  cfg.gu_k_unknown = j.value("gu_k_unknown", cfg.gu_k_unknown);
  cfg.gu_holdout_fraction = j.value("gu_holdout_fraction", cfg.gu_holdout_fraction);
  if (j.contains("trainer")) cfg.trainer = trainer_from_json(j.at("trainer"));
  if (j.contains("probe")) cfg.probe = probe_from_json(j.at("probe"));
  if (j.contains("master_seed")) cfg.master_seed = seed_from_json(j.at("master_seed"));
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  if (const char* env = std::getenv("TEXTBIAS_OUTPUT_DIR"); env && *env) {
    cfg.output_dir = env;
  }
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  json input;
  input["path"] = cfg.input.path;
  input["format"] = cfg.input.format;
  input["rating_field"] = cfg.input.review_fields.rating;
  input["nuisance_field"] = cfg.input.review_fields.nuisance;
  input["text_field"] = cfg.input.review_fields.text;
  j["input"] = std::move(input);
  if (cfg.synth) j["synth"] = synth_to_json(*cfg.synth);
  j["k_top_nuisances"] = cfg.k_top_nuisances;
  j["alphas"] = cfg.alphas;
  j["n_folds"] = cfg.n_folds;
  j["betas"] = cfg.betas;
  j["gtb_test_fraction"] = cfg.gtb_test_fraction;
  j["gu_seeds"] = cfg.gu_seeds;
  j["probe_seeds"] = cfg.probe_seeds;
  j["gu_k_unknown"] = cfg.gu_k_unknown;
  j["gu_holdout_fraction"] = cfg.gu_holdout_fraction;
  j["trainer"] = trainer_to_json(cfg.trainer);
  j["probe"] = probe_to_json(cfg.probe);
  j["master_seed"] = cfg.master_seed;
  j["output_dir"] = cfg.output_dir;
  return j.dump(2);
}

namespace {

struct StageSeeds {
  explicit StageSeeds(std::uint64_t master) : master_(master) {}
  std::uint64_t next(const std::string& name) {
    const std::uint64_t counter = entries.size();
    const std::uint64_t seed = derived_seed(master_, counter);
    entries.push_back({name, counter, seed});
    return seed;
  }
  struct Entry {
    std::string name;
    std::uint64_t counter;
    std::uint64_t seed;
  };
  std::vector<Entry> entries;

 private:
  std::uint64_t master_;
};

Dataset load_input(const ExperimentConfig& cfg) {
  if (cfg.synth) return synth_generate(*cfg.synth);
  if (cfg.input.path.empty()) {
    throw ConfigError("config needs either an input path or a synth block");
  }
  std::string format = cfg.input.format;
  if (format == "auto") {
    std::ifstream in(cfg.input.path);
    if (!in) throw ConfigError("cannot open " + cfg.input.path);
    std::string line;
    format = "reviews";
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json first;
      try {
        first = json::parse(line);
      } catch (const json::exception&) {
        break;  // let the real reader produce the error with a line number
      }
      if (first.is_object() && first.contains("label") && first.contains("nuisance")) {
        format = "labeled";
      }
      break;
    }
  }
  if (format == "labeled") return read_labeled_jsonl(cfg.input.path);
  if (format == "reviews") return ingest_reviews(cfg.input.path, cfg.input.review_fields);
  throw ConfigError("unknown input format '" + cfg.input.format + "'");
}

json removal_log_to_json(const RemovalLog& log, std::size_t n_labels, std::size_t n_nuisances) {
  json j;
  j["alpha"] = log.alpha;
  j["epsilon"] = log.epsilon;
  j["total_removed"] = log.total_removed;
  json grid = json::array();
  for (std::size_t y = 0; y < n_labels; ++y) {
    json row = json::array();
    for (std::size_t s = 0; s < n_nuisances; ++s) {
      row.push_back(log.removed_per_cell[y * n_nuisances + s]);
    }
    grid.push_back(std::move(row));
  }
  j["removed_per_cell"] = std::move(grid);
  return j;
}

RemovalLog removal_log_from_json(const json& j) {
  RemovalLog log;
  log.alpha = j.at("alpha").get<double>();
  log.epsilon = j.at("epsilon").get<double>();
  log.total_removed = j.at("total_removed").get<std::int64_t>();
  for (const auto& row : j.at("removed_per_cell")) {
    for (const auto& cell : row) log.removed_per_cell.push_back(cell.get<std::int64_t>());
  }
  return log;
}

json mi_to_json(const MiEstimate& e) {
  json j;
  j["value"] = e.value;
  j["n_folds"] = e.n_folds;
  j["entropy_term"] = e.entropy_term;
  j["cross_entropy_term"] = e.cross_entropy_term;
  return j;
}

MiEstimate mi_from_json(const json& j) {
  MiEstimate e;
  e.value = j.at("value").get<double>();
  e.n_folds = j.at("n_folds").get<int>();
  e.entropy_term = j.at("entropy_term").get<double>();
  e.cross_entropy_term = j.at("cross_entropy_term").get<double>();
  return e;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.output_dir.empty()) throw ConfigError("output_dir is empty");
  if (cfg.n_folds < 2) throw ConfigError("n_folds must be at least 2");
  for (double b : cfg.betas) {
    if (b < 0.5 || b > 1.0) throw ConfigError("betas must lie in [0.5, 1]");
  }
  if (cfg.gu_seeds < 0 || cfg.probe_seeds < 0) {
    throw ConfigError("gu_seeds and probe_seeds must be non-negative");
  }

  namespace fs = std::filesystem;
  const std::string out = cfg.output_dir;
  fs::create_directories(out + "/subsets");

  const std::size_t n_subsets = cfg.alphas.size() + 1;
  StageSeeds seeds(cfg.master_seed);
  const std::uint64_t balance_seed = seeds.next("balance");
  const std::uint64_t filter_seed = seeds.next("filter");
  struct SubsetSeeds {
    std::uint64_t gtb_split, gtb_train, gtb_probe;
    std::uint64_t gu_split, gu_train;
    std::uint64_t gu_probe_split, gu_probe_train, gu_probe_cfg;
  };
  std::vector<SubsetSeeds> subset_seeds;
  for (std::size_t i = 0; i < n_subsets; ++i) {
    const std::string suffix = "[D" + std::to_string(i) + "]";
    SubsetSeeds ss;
    ss.gtb_split = seeds.next("gtb_split" + suffix);
    ss.gtb_train = seeds.next("gtb_train" + suffix);
    ss.gtb_probe = seeds.next("gtb_probe" + suffix);
    ss.gu_split = seeds.next("gu_split" + suffix);
    ss.gu_train = seeds.next("gu_train" + suffix);
    ss.gu_probe_split = seeds.next("gu_probe_split" + suffix);
    ss.gu_probe_train = seeds.next("gu_probe_train" + suffix);
    ss.gu_probe_cfg = seeds.next("gu_probe_cfg" + suffix);
    subset_seeds.push_back(ss);
  }

  ExperimentResult result;
  json manifest;
  manifest["tool"] = "textbias 0.1.0";
  manifest["config"] = json::parse(config_to_json(cfg));

  std::vector<MetricReport> rows;
  std::vector<RemovalLog> removal_logs;
  std::vector<Dataset> subsets;

  auto flush_reports = [&]() {
    try {
      write_metrics_csv(rows, out + "/metrics.csv");
    } catch (...) {
    }
  };
  auto run_stage = [&](const std::string& name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      flush_reports();
      throw std::runtime_error("stage '" + name + "' failed: " + e.what());
    }
  };

  // ---- ingest ----
  Dataset base;
  run_stage("ingest", [&] {
    Dataset raw = load_input(cfg);
    if (raw.empty()) throw DataError("input corpus is empty");
    if (cfg.k_top_nuisances > 0 &&
        static_cast<std::size_t>(cfg.k_top_nuisances) < raw.num_nuisances()) {
      raw = select_top_nuisances(raw, static_cast<std::size_t>(cfg.k_top_nuisances));
    }
    base = balance_labels(raw, balance_seed);
  });
  const std::string digest = dataset_digest(base);
  manifest["input_digest"] = digest;

  // ---- filter ----
  run_stage("filter", [&] {
    const std::string state_path = out + "/filter_state.json";
    const json trainer_echo = trainer_to_json(cfg.trainer);

    bool resumed = false;
    if (fs::exists(state_path)) {
      std::ifstream in(state_path);
      json state;
      try {
        state = json::parse(in);
      } catch (const json::exception&) {
        state = json::object();
      }
      if (state.value("digest", "") == digest &&
          state.value("filter_seed", "") == std::to_string(filter_seed) &&
          state.value("n_folds", -1) == cfg.n_folds &&
          state.value("alphas", json::array()) == json(cfg.alphas) &&
          state.value("trainer", json::object()) == trainer_echo) {
        const auto label_space = state.at("label_space").get<std::vector<std::string>>();
        const auto nuisance_space = state.at("nuisance_space").get<std::vector<std::string>>();
        for (std::size_t i = 0; i < n_subsets; ++i) {
          const std::string path = out + "/subsets/D" + std::to_string(i) + ".jsonl";
          subsets.push_back(adopt_spaces(read_labeled_jsonl(path), label_space, nuisance_space));
        }
        for (const auto& jm : state.at("mi")) result.subset_mi.push_back(mi_from_json(jm));
        for (const auto& jl : state.at("removal_logs")) {
          removal_logs.push_back(removal_log_from_json(jl));
        }
        resumed = true;
      }
    }

    if (!resumed) {
      if (cfg.alphas.empty()) {
        subsets.push_back(base);
        ContributionTable ct =
            contributions(base, cfg.n_folds, cfg.trainer, derived_seed(filter_seed, 0));
        result.subset_mi.push_back(estimate_mi(ct));
        write_contributions_csv(ct, out + "/subsets/contributions_D0.csv");
      } else {
        FilterSchedule schedule;
        schedule.alphas = cfg.alphas;
        schedule.n_folds = cfg.n_folds;
        schedule.seed = filter_seed;
        FilterSequence seq = filter_sequence(base, schedule, cfg.trainer);
        subsets = std::move(seq.subsets);
        result.subset_mi = std::move(seq.mi_estimates);
        removal_logs = std::move(seq.removal_logs);
        for (std::size_t i = 0; i < seq.contribution_tables.size(); ++i) {
          write_contributions_csv(seq.contribution_tables[i],
                                  out + "/subsets/contributions_D" + std::to_string(i) + ".csv");
        }
      }
      for (std::size_t i = 0; i < subsets.size(); ++i) {
        write_jsonl(subsets[i], out + "/subsets/D" + std::to_string(i) + ".jsonl");
      }
      json state;
      state["digest"] = digest;
      state["filter_seed"] = std::to_string(filter_seed);
      state["n_folds"] = cfg.n_folds;
      state["alphas"] = cfg.alphas;
      state["trainer"] = trainer_echo;
      state["label_space"] = subsets.front().label_space();
      state["nuisance_space"] = subsets.front().nuisance_space();
      json jmi = json::array();
      for (const MiEstimate& e : result.subset_mi) jmi.push_back(mi_to_json(e));
      state["mi"] = std::move(jmi);
      json jlogs = json::array();
      for (const RemovalLog& log : removal_logs) {
        jlogs.push_back(removal_log_to_json(log, subsets.front().num_labels(),
                                            subsets.front().num_nuisances()));
      }
      state["removal_logs"] = std::move(jlogs);
      std::ofstream st(state_path);
      st << state.dump(2) << '\n';
    }

    for (std::size_t i = 0; i < subsets.size(); ++i) {
      result.subset_names.push_back("D" + std::to_string(i));
      result.subset_sizes.push_back(subsets[i].size());
    }
  });

  // ---- gtb sweep ----
  json gtb_manifest = json::array();
  run_stage("gtb", [&] {
    for (std::size_t i = 0; i < subsets.size() && !cfg.betas.empty(); ++i) {
      const SubsetSeeds& ss = subset_seeds[i];
      json subset_entry;
      subset_entry["subset"] = result.subset_names[i];
      subset_entry["split_seed"] = std::to_string(ss.gtb_split);
      subset_entry["train_seed"] = std::to_string(ss.gtb_train);
      subset_entry["betas"] = cfg.betas;
      bool plan_recorded = false;
      for (std::size_t b = 0; b < cfg.betas.size(); ++b) {
        SplitResult sr = gtb_split(subsets[i], cfg.betas[b], ss.gtb_split, cfg.gtb_test_fraction);
        const TrainedClassifier model = train(sr.train, cfg.trainer, ss.gtb_train);
        MetricReport r = gtb_metric(model, sr);
        ProbeConfig pc = cfg.probe;
        pc.seed = derived_seed(ss.gtb_probe, b);
        double majority = -1.0;
        r.identifiability = identifiability_gtb(model, sr, pc, &majority);
        r.majority_baseline = majority;
        r.context.dataset = result.subset_names[i];
        r.context.iteration = static_cast<int>(i);
        rows.push_back(std::move(r));
        if (!plan_recorded) {
          // The favored map and groups depend only on the split seed, so one
          // record covers the whole beta sweep.
          const GtbPlan& plan = std::get<GtbPlan>(sr.plan);
          const auto& space = sr.train.nuisance_space();
          json favored = json::object();
          for (std::size_t s = 0; s < plan.favored.size(); ++s) {
            if (plan.favored[s] >= 0) favored[space[s]] = plan.favored[s];
          }
          subset_entry["favored"] = std::move(favored);
          json dropped = json::array();
          for (int s : plan.dropped_sources) dropped.push_back(space[static_cast<std::size_t>(s)]);
          subset_entry["dropped_sources"] = std::move(dropped);
          json groups = json::array();
          for (const auto& g : plan.groups) {
            json names = json::array();
            for (int s : g) names.push_back(space[static_cast<std::size_t>(s)]);
            groups.push_back(std::move(names));
          }
          subset_entry["groups"] = std::move(groups);
          plan_recorded = true;
        }
      }
      gtb_manifest.push_back(std::move(subset_entry));
    }
  });

  // ---- gu repetitions ----
  json gu_manifest = json::array();
  run_stage("gu", [&] {
    for (std::size_t i = 0; i < subsets.size(); ++i) {
      const SubsetSeeds& ss = subset_seeds[i];
      const std::size_t n_sources = subsets[i].num_nuisances();
      const std::size_t k_unknown =
          cfg.gu_k_unknown > 0 ? cfg.gu_k_unknown : n_sources / 2;
      json subset_entry;
      subset_entry["subset"] = result.subset_names[i];
      subset_entry["k_unknown"] = k_unknown;
      json reps = json::array();
      for (int rep = 0; rep < cfg.gu_seeds; ++rep) {
        const std::uint64_t split_seed = derived_seed(ss.gu_split, static_cast<std::uint64_t>(rep));
        SplitResult sr = gu_split(subsets[i], k_unknown, split_seed, cfg.gu_holdout_fraction);
        const TrainedClassifier model =
            train(sr.train, cfg.trainer, derived_seed(ss.gu_train, static_cast<std::uint64_t>(rep)));
        MetricReport r = gu_metric(model, sr);
        r.context.dataset = result.subset_names[i];
        r.context.iteration = static_cast<int>(i);
        r.context.seed_index = rep;
        rows.push_back(std::move(r));

        json rep_entry;
        rep_entry["rep"] = rep;
        rep_entry["split_seed"] = std::to_string(split_seed);
        json unknown = json::array();
        for (int s : std::get<GuPlan>(sr.plan).unknown_sources) {
          unknown.push_back(subsets[i].nuisance_space()[static_cast<std::size_t>(s)]);
        }
        rep_entry["unknown_sources"] = std::move(unknown);
        reps.push_back(std::move(rep_entry));
      }
      subset_entry["metric_reps"] = std::move(reps);

      json probe_reps = json::array();
      for (int rep = 0; rep < cfg.probe_seeds; ++rep) {
        const std::uint64_t split_seed =
            derived_seed(ss.gu_probe_split, static_cast<std::uint64_t>(rep));
        SplitResult sr = gu_split(subsets[i], k_unknown, split_seed, cfg.gu_holdout_fraction);
        const TrainedClassifier model = train(
            sr.train, cfg.trainer, derived_seed(ss.gu_probe_train, static_cast<std::uint64_t>(rep)));
        MetricReport r = gu_metric(model, sr);
        ProbeConfig pc = cfg.probe;
        pc.seed = derived_seed(ss.gu_probe_cfg, static_cast<std::uint64_t>(rep));
        double majority = -1.0;
        r.identifiability = identifiability_gu(model, sr, pc, &majority);
        r.majority_baseline = majority;
        r.context.dataset = result.subset_names[i];
        r.context.iteration = static_cast<int>(i);
        r.context.seed_index = rep;
        rows.push_back(std::move(r));

        json rep_entry;
        rep_entry["rep"] = rep;
        rep_entry["split_seed"] = std::to_string(split_seed);
        probe_reps.push_back(std::move(rep_entry));
      }
      subset_entry["probe_reps"] = std::move(probe_reps);
      gu_manifest.push_back(std::move(subset_entry));
    }
  });

  // ---- reports ----
  run_stage("report", [&] {
    write_metrics_csv(rows, out + "/metrics.csv");

    {
      std::ofstream f(out + "/subset_mi.csv");
      if (!f) throw ConfigError("cannot open " + out + "/subset_mi.csv for writing");
      f << "subset,size,mi,entropy_term,cross_entropy_term,alpha,epsilon,removed\n";
      for (std::size_t i = 0; i < subsets.size(); ++i) {
        const MiEstimate& e = result.subset_mi[i];
        f << result.subset_names[i] << ',' << result.subset_sizes[i] << ','
          << format_double(e.value) << ',' << format_double(e.entropy_term) << ','
          << format_double(e.cross_entropy_term) << ',';
        if (i < removal_logs.size()) {
          f << format_double(removal_logs[i].alpha) << ','
            << format_double(removal_logs[i].epsilon) << ',' << removal_logs[i].total_removed;
        } else {
          f << ",,";
        }
        f << '\n';
      }
    }

    {
      std::ofstream f(out + "/gtb_by_beta.csv");
      if (!f) throw ConfigError("cannot open " + out + "/gtb_by_beta.csv for writing");
      f << "subset,beta,acc_same,acc_shifted,normalized,disc,disc_ratio,identifiability,"
           "majority_baseline\n";
      for (const MetricReport& r : rows) {
        if (r.context.kind != MetricKind::Gtb) continue;
        f << r.context.dataset << ',' << format_double(r.context.beta) << ','
          << format_double(r.acc_same) << ',' << format_double(r.acc_shifted) << ','
          << format_double(r.normalized) << ',';
        if (auto it = r.disc.find(1); it != r.disc.end()) f << format_double(it->second);
        f << ',';
        if (auto it = r.disc_ratio.find(1); it != r.disc_ratio.end()) {
          f << format_double(it->second);
        }
        f << ',' << format_double(r.identifiability) << ','
          << format_double(r.majority_baseline) << '\n';
      }
    }

    {
      std::ofstream f(out + "/gu_summary.csv");
      if (!f) throw ConfigError("cannot open " + out + "/gu_summary.csv for writing");
      f << "subset,n_gu_seeds,gu_mean,gu_std,n_probe_seeds,ident_mean,ident_std,"
           "majority_mean\n";
      for (std::size_t i = 0; i < subsets.size(); ++i) {
        std::vector<double> gu_values, ident_values, majority_values;
        for (const MetricReport& r : rows) {
          if (r.context.kind != MetricKind::Gu || r.context.dataset != result.subset_names[i]) {
            continue;
          }
          if (r.identifiability >= 0.0) {
            ident_values.push_back(r.identifiability);
            majority_values.push_back(r.majority_baseline);
          } else {
            gu_values.push_back(r.normalized);
          }
        }
        const MeanStd gu = mean_std(gu_values);
        const MeanStd ident = mean_std(ident_values);
        const MeanStd majority = mean_std(majority_values);
        f << result.subset_names[i] << ',' << gu_values.size() << ',' << format_double(gu.mean)
          << ',' << format_double(gu.std) << ',' << ident_values.size() << ','
          << format_double(ident.mean) << ',' << format_double(ident.std) << ','
          << format_double(majority.mean) << '\n';
      }
    }

    {
      std::ofstream f(out + "/config.json");
      if (!f) throw ConfigError("cannot open " + out + "/config.json for writing");
      f << config_to_json(cfg) << '\n';
    }

    json seeds_manifest = json::array();
    for (const StageSeeds::Entry& e : seeds.entries) {
      json entry;
      entry["name"] = e.name;
      entry["counter"] = e.counter;
      entry["seed"] = std::to_string(e.seed);
      seeds_manifest.push_back(std::move(entry));
    }
    manifest["stage_seeds"] = std::move(seeds_manifest);
    json subsets_manifest = json::array();
    for (std::size_t i = 0; i < subsets.size(); ++i) {
      json entry;
      entry["name"] = result.subset_names[i];
      entry["size"] = result.subset_sizes[i];
      entry["mi"] = mi_to_json(result.subset_mi[i]);
      if (i < removal_logs.size()) {
        entry["removal"] = removal_log_to_json(removal_logs[i], subsets[i].num_labels(),
                                               subsets[i].num_nuisances());
      }
      subsets_manifest.push_back(std::move(entry));
    }
    manifest["subsets"] = std::move(subsets_manifest);
    manifest["gtb"] = gtb_manifest;
    manifest["gu"] = gu_manifest;
    std::ofstream mf(out + "/manifest.json");
    if (!mf) throw ConfigError("cannot open " + out + "/manifest.json for writing");
    mf << manifest.dump(2) << '\n';
  });

  result.reports = std::move(rows);
  return result;
}

}  // namespace textbias
