// Microbenchmarks for the hot paths: featurization, training, prediction,
// the MI machinery and the rejection step. Run with --benchmark_filter=...

#include <benchmark/benchmark.h>

#include <textbias/corpus.hpp>
#include <textbias/filtering.hpp>
#include <textbias/mi.hpp>
#include <textbias/probe.hpp>
#include <textbias/rng.hpp>
#include <textbias/splits.hpp>
#include <textbias/synth.hpp>
#include <textbias/textmodel.hpp>

#include <string>
#include <vector>

namespace {

textbias::Dataset demo_corpus(int per_cell) {
  textbias::SynthSpec spec;
  spec.n_sources = 4;
  spec.n_labels = 2;
  spec.per_cell = per_cell;
  spec.background_tokens = 12;
  spec.seed = 7;
  return textbias::synth_generate(spec);
}

textbias::TrainerConfig bench_trainer() {
  textbias::TrainerConfig cfg;
  cfg.featurizer.bucket_count = 1u << 16;
  return cfg;
}

void BM_Featurize(benchmark::State& state) {
  textbias::FeaturizerConfig cfg;
  cfg.bucket_count = 1u << 16;
  const std::string text =
      "this benchmark sentence has a dozen tokens, punctuation and MIXED case!";
  for (auto _ : state) {
    benchmark::DoNotOptimize(textbias::featurize(text, cfg));
  }
}
BENCHMARK(BM_Featurize);

void BM_Train(benchmark::State& state) {
  const textbias::Dataset d = demo_corpus(static_cast<int>(state.range(0)));
  const textbias::TrainerConfig cfg = bench_trainer();
  for (auto _ : state) {
    benchmark::DoNotOptimize(textbias::train(d, cfg, 11));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.size()) *
                          cfg.epochs);
}
BENCHMARK(BM_Train)->Arg(64)->Arg(256);

void BM_Predict(benchmark::State& state) {
  const textbias::Dataset d = demo_corpus(64);
  const textbias::TrainedClassifier model = textbias::train(d, bench_trainer(), 11);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(textbias::predict(model, d.samples()[i].text));
    i = (i + 1) % d.size();
  }
}
BENCHMARK(BM_Predict);

void BM_Contributions(benchmark::State& state) {
  const textbias::Dataset d = demo_corpus(static_cast<int>(state.range(0)));
  textbias::TrainerConfig cfg = bench_trainer();
  cfg.dim = 8;
  cfg.epochs = 2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(textbias::contributions(d, 4, cfg, 13));
  }
}
BENCHMARK(BM_Contributions)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_PlugInMi(benchmark::State& state) {
  textbias::ContingencyTable t;
  t.rows = 8;
  t.cols = 16;
  t.counts.assign(t.rows * t.cols, 0);
  textbias::Rng rng(17);
  for (int y = 0; y < 8; ++y) {
    for (int s = 0; s < 16; ++s) t.at(y, s) = static_cast<std::int64_t>(rng.below(1000));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(textbias::plug_in_mi(t));
  }
}
BENCHMARK(BM_PlugInMi);

void BM_RejectIteration(benchmark::State& state) {
  const textbias::Dataset d = demo_corpus(static_cast<int>(state.range(0)));
  textbias::ContributionTable table;
  table.n_folds = 1;
  table.fold_entropies = {0.0};
  textbias::Rng rng(19);
  for (std::size_t i = 0; i < d.size(); ++i) {
    textbias::ContributionEntry e;
    e.sample_index = i;
    e.fold = 0;
    e.contribution = rng.unit();
    table.entries.push_back(e);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(textbias::reject_iteration(d, 0.25, table));
  }
}
BENCHMARK(BM_RejectIteration)->Arg(256);

void BM_GtbSplit(benchmark::State& state) {
  const textbias::Dataset d = demo_corpus(256);
  for (auto _ : state) {
    benchmark::DoNotOptimize(textbias::gtb_split(d, 0.7, 23, 0.2));
  }
}
BENCHMARK(BM_GtbSplit);

void BM_ProbeEpoch(benchmark::State& state) {
  textbias::Rng rng(29);
  std::vector<std::vector<double>> reps;
  std::vector<int> targets;
  for (int i = 0; i < 1024; ++i) {
    std::vector<double> rep(20);
    for (double& v : rep) v = rng.unit() - 0.5;
    reps.push_back(std::move(rep));
    targets.push_back(static_cast<int>(rng.below(4)));
  }
  textbias::ProbeConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 31;
  for (auto _ : state) {
    benchmark::DoNotOptimize(textbias::train_probe(reps, targets, {"a", "b", "c", "d"}, cfg));
  }
}
BENCHMARK(BM_ProbeEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
