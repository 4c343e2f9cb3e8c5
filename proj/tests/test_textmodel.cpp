#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <textbias/corpus.hpp>
#include <textbias/errors.hpp>
#include <textbias/textmodel.hpp>

#include "test_util.hpp"

using namespace textbias;
using testutil::TempDir;
using testutil::make_dataset;

namespace {

FeaturizerConfig small_featurizer() {
  FeaturizerConfig f;
  f.bucket_count = 1u << 14;
  return f;
}

TrainerConfig small_trainer() {
  TrainerConfig t;
  t.dim = 8;
  t.featurizer = small_featurizer();
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("textmodel");

TEST_CASE("fnv1a64 matches the reference constants") {
  // Offset basis and a one-byte probe, straight from the FNV definition.
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("a") == (14695981039346656037ULL ^ 'a') * 1099511628211ULL);
}

TEST_CASE("two tokens produce two unigrams and one bigram") {
  FeaturizerConfig cfg = small_featurizer();
  auto idx = featurize("good book", cfg);
  REQUIRE(idx.size() == 3);
  CHECK(idx[0] == fnv1a64("good") % cfg.bucket_count);
  CHECK(idx[1] == fnv1a64("book") % cfg.bucket_count);
  // The bigram hash equals hashing "good", a 0x1f separator, then "book".
  std::string joined = "good";
  joined.push_back('\x1f');
  joined += "book";
  CHECK(idx[2] == fnv1a64(joined) % cfg.bucket_count);

  FeaturizerConfig no_bi = cfg;
  no_bi.use_bigrams = false;
  CHECK(featurize("good book", no_bi).size() == 2);
}

TEST_CASE("tokenization lowercases and strips edge punctuation") {
  FeaturizerConfig cfg = small_featurizer();
  CHECK(featurize("Good, Book!", cfg) == featurize("good book", cfg));
  // Interior punctuation stays.
  CHECK(featurize("don't", cfg)[0] == fnv1a64("don't") % cfg.bucket_count);
  // Pure punctuation tokens vanish.
  CHECK(featurize("... !!! ???", cfg).empty());
  CHECK(featurize("", cfg).empty());
  CHECK(featurize("   ", cfg).empty());
}

TEST_CASE("tokenization splits on unicode whitespace") {
  FeaturizerConfig cfg = small_featurizer();
  // U+00A0 no-break space and U+2003 em space both separate tokens.
  CHECK(featurize("a\xC2\xA0"
                  "b",
                  cfg) == featurize("a b", cfg));
  CHECK(featurize("a\xE2\x80\x83"
                  "b",
                  cfg) == featurize("a b", cfg));
  // Lowercasing is ASCII-only: multibyte characters pass through.
  CHECK(featurize("Caf\xC3\xA9", cfg) == featurize("caf\xC3\xA9", cfg));
}

TEST_CASE("untrained head predicts the uniform distribution") {
  Dataset d = make_dataset({{0, "s", "alpha"}, {1, "s", "beta"}, {2, "s", "gamma"}});
  TrainerConfig cfg = small_trainer();
  cfg.epochs = 0;
  TrainedClassifier m = train(d, cfg, 1);
  Prediction p = predict(m, "anything at all");
  REQUIRE(p.probs.size() == 3);
  for (double q : p.probs) CHECK(q == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(p.target == 0);  // ties resolve to the lowest index
  // A featureless text scores from the zero bias: also uniform.
  Prediction pf = predict(m, "!!!");
  for (double q : pf.probs) CHECK(q == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("probabilities sum to one and match logprobs") {
  Dataset d = make_dataset({{0, "s", "up up"}, {1, "s", "down down"}});
  TrainedClassifier m = train(d, small_trainer(), 3);
  Prediction p = predict(m, "up down");
  double sum = 0;
  for (double q : p.probs) sum += q;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  auto lp = predict_logprobs(m, "up down");
  REQUIRE(lp.size() == p.probs.size());
  for (std::size_t c = 0; c < lp.size(); ++c) {
    CHECK(std::exp(lp[c]) == doctest::Approx(p.probs[c]).epsilon(1e-10));
  }
}

TEST_CASE("a separable corpus is learned perfectly") {
  std::vector<std::tuple<int, std::string, std::string>> rows;
  for (int i = 0; i < 30; ++i) {
    rows.push_back({0, "s", "common filler cue_zero w" + std::to_string(i % 7)});
    rows.push_back({1, "s", "common filler cue_one w" + std::to_string(i % 7)});
  }
  Dataset d = make_dataset(rows);
  TrainedClassifier m = train(d, small_trainer(), 11);
  CHECK(accuracy(m, d) == doctest::Approx(1.0));
}

TEST_CASE("training is deterministic in the seed") {
  Dataset d = make_dataset({{0, "s", "aa bb"}, {1, "s", "cc dd"}, {0, "s", "ee"}, {1, "s", "ff"}});
  TrainedClassifier m1 = train(d, small_trainer(), 42);
  TrainedClassifier m2 = train(d, small_trainer(), 42);
  CHECK(m1.head == m2.head);
  CHECK(m1.bias == m2.bias);
  CHECK(m1.embeddings == m2.embeddings);
  TrainedClassifier m3 = train(d, small_trainer(), 43);
  CHECK(m1.embeddings != m3.embeddings);
}

TEST_CASE("featureless samples are skipped and counted") {
  std::vector<std::string_view> texts{"real text", "..."};
  std::vector<int> targets{0, 1};
  std::size_t skipped = 0;
  TrainedClassifier m =
      train_text_classifier(texts, targets, {"a", "b"}, small_trainer(), 1, &skipped);
  CHECK(skipped == 1);
  CHECK(m.num_targets() == 2);
  // All-skipped input cannot be trained on.
  std::vector<std::string_view> bad{"...", "!!!"};
  CHECK_THROWS_AS(train_text_classifier(bad, targets, {"a", "b"}, small_trainer(), 1),
                  DataError);
}

TEST_CASE("trainer validates its configuration") {
  Dataset d = make_dataset({{0, "s", "x"}, {1, "s", "y"}});
  TrainerConfig cfg = small_trainer();
  cfg.dim = 0;
  CHECK_THROWS_AS(train(d, cfg, 1), ConfigError);
  cfg = small_trainer();
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(train(d, cfg, 1), ConfigError);
  cfg = small_trainer();
  cfg.featurizer.bucket_count = 1;
  CHECK_THROWS_AS(train(d, cfg, 1), ConfigError);
}

TEST_CASE("representation is the mean of the feature embedding rows") {
  Dataset d = make_dataset({{0, "s", "aa"}, {1, "s", "bb"}});
  TrainerConfig cfg = small_trainer();
  cfg.epochs = 0;  // keep the random init untouched
  TrainedClassifier m = train(d, cfg, 5);
  const std::string text = "aa bb cc";
  auto feats = featurize(text, m.featurizer);
  REQUIRE(!feats.empty());
  std::vector<double> want(static_cast<std::size_t>(m.dim), 0.0);
  for (auto f : feats) {
    for (int k = 0; k < m.dim; ++k) {
      want[static_cast<std::size_t>(k)] +=
          m.embeddings[static_cast<std::size_t>(f) * m.dim + k];
    }
  }
  for (double& w : want) w /= static_cast<double>(feats.size());
  auto got = represent(m, text);
  REQUIRE(got.size() == want.size());
  for (std::size_t k = 0; k < want.size(); ++k) {
    CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12));
  }
  // Initial weights stay inside the documented range.
  for (double w : m.embeddings) CHECK(std::abs(w) <= 1.0 / m.dim);
}

TEST_CASE("serialization round trip is bit exact") {
  Dataset d = make_dataset({{0, "s", "good fine"}, {1, "s", "bad poor"}});
  TrainedClassifier m = train(d, small_trainer(), 9);
  TempDir dir;
  const std::string path = dir.file("m.bin").string();
  save_classifier(m, path);
  TrainedClassifier back = load_classifier(path);
  CHECK(back.featurizer.bucket_count == m.featurizer.bucket_count);
  CHECK(back.featurizer.use_bigrams == m.featurizer.use_bigrams);
  CHECK(back.featurizer.lowercase == m.featurizer.lowercase);
  CHECK(back.dim == m.dim);
  CHECK(back.target_space == m.target_space);
  CHECK(back.embeddings == m.embeddings);
  CHECK(back.head == m.head);
  CHECK(back.bias == m.bias);
  Prediction a = predict(m, "good poor");
  Prediction b = predict(back, "good poor");
  CHECK(a.probs == b.probs);
}

TEST_CASE("loading rejects foreign and truncated files") {
  TempDir dir;
  testutil::write_file(dir.file("junk.bin"), "this is not a model");
  CHECK_THROWS_AS(load_classifier(dir.file("junk.bin").string()), DataError);
  CHECK_THROWS_AS(load_classifier(dir.file("missing.bin").string()), ConfigError);
}

TEST_CASE("analytic gradients agree with finite differences") {
  Dataset d = make_dataset({{0, "s", "aa bb"}, {1, "s", "cc"}});
  TrainedClassifier m = train(d, small_trainer(), 17);
  auto feats = featurize("aa cc", m.featurizer);
  const int target = 1;
  ClassifierGradients g = sample_gradients(m, feats, target);

  const double step = 1e-6;
  auto fd = [&](double* slot) {
    const double saved = *slot;
    *slot = saved + step;
    const double up = sample_loss(m, feats, target);
    *slot = saved - step;
    const double down = sample_loss(m, feats, target);
    *slot = saved;
    return (up - down) / (2 * step);
  };

  for (std::size_t c = 0; c < m.num_targets(); ++c) {
    CHECK(fd(&m.bias[c]) == doctest::Approx(g.bias[c]).epsilon(1e-5));
    for (int k = 0; k < m.dim; ++k) {
      const std::size_t i = c * static_cast<std::size_t>(m.dim) + static_cast<std::size_t>(k);
      CHECK(fd(&m.head[i]) == doctest::Approx(g.head[i]).epsilon(1e-5).scale(1.0));
    }
  }
  for (const auto& [row, grad] : g.embeddings) {
    for (int k = 0; k < m.dim; ++k) {
      const std::size_t i = static_cast<std::size_t>(row) * m.dim + static_cast<std::size_t>(k);
      CHECK(fd(&m.embeddings[i]) ==
            doctest::Approx(grad[static_cast<std::size_t>(k)]).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_SUITE_END();
