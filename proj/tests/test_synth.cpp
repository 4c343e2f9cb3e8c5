#include <doctest.h>

#include <set>
#include <sstream>
#include <string>

#include <textbias/errors.hpp>
#include <textbias/mi.hpp>
#include <textbias/synth.hpp>

using namespace textbias;

namespace {

std::set<std::string> token_set(const std::string& text) {
  std::set<std::string> out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) out.insert(tok);
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("synth");

TEST_CASE("every cell holds exactly per_cell samples") {
  SynthSpec spec;
  spec.n_sources = 3;
  spec.n_labels = 2;
  spec.per_cell = 17;
  spec.seed = 4;
  Dataset d = synth_generate(spec);
  CHECK(d.size() == 3u * 2u * 17u);
  CHECK(d.label_space() == std::vector<std::string>{"y0", "y1"});
  CHECK(d.nuisance_space() == std::vector<std::string>{"s0", "s1", "s2"});
  for (int y = 0; y < 2; ++y) {
    for (int s = 0; s < 3; ++s) CHECK(d.count(y, s) == 17);
  }
  // Independent by construction.
  CHECK(plug_in_mi(contingency(d)) == 0.0);
}

TEST_CASE("signal strengths of zero and one are exact") {
  SynthSpec spec;
  spec.n_sources = 2;
  spec.n_labels = 2;
  spec.per_cell = 25;
  spec.label_signal = 1.0;
  spec.nuisance_signal = 0.0;
  spec.seed = 9;
  Dataset d = synth_generate(spec);
  for (const Sample& s : d.samples()) {
    const std::set<std::string> toks = token_set(s.text);
    CHECK(toks.count("LBL" + std::to_string(s.label)) == 1);
    CHECK(!toks.count("SRC0"));
    CHECK(!toks.count("SRC1"));
  }
}

TEST_CASE("intermediate signals land near their expectation") {
  SynthSpec spec;
  spec.n_sources = 2;
  spec.n_labels = 2;
  spec.per_cell = 500;
  spec.label_signal = 0.25;
  spec.nuisance_signal = 0.75;
  spec.seed = 13;
  Dataset d = synth_generate(spec);
  std::size_t with_label = 0, with_source = 0;
  for (const Sample& s : d.samples()) {
    const std::set<std::string> toks = token_set(s.text);
    with_label += toks.count("LBL" + std::to_string(s.label));
    with_source += toks.count("SRC" + std::to_string(s.nuisance));
  }
  const double n = static_cast<double>(d.size());
  CHECK(static_cast<double>(with_label) / n == doctest::Approx(0.25).epsilon(0.15));
  CHECK(static_cast<double>(with_source) / n == doctest::Approx(0.75).epsilon(0.15));
}

TEST_CASE("generation is deterministic and texts are never empty") {
  SynthSpec spec;
  spec.n_sources = 2;
  spec.n_labels = 2;
  spec.per_cell = 10;
  spec.background_tokens = 0;
  spec.label_signal = 0.0;
  spec.nuisance_signal = 0.0;
  spec.seed = 21;
  Dataset d = synth_generate(spec);
  for (const Sample& s : d.samples()) {
    CHECK(!s.text.empty());
    CHECK(s.text[0] == 'w');  // the fallback background token
  }
  Dataset again = synth_generate(spec);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d.samples()[i].text == again.samples()[i].text);
  }
}

TEST_CASE("synth spec validation") {
  SynthSpec spec;
  spec.n_sources = 0;
  CHECK_THROWS_AS(synth_generate(spec), ConfigError);
  spec = SynthSpec{};
  spec.label_signal = 1.5;
  CHECK_THROWS_AS(synth_generate(spec), ConfigError);
  spec = SynthSpec{};
  spec.background_vocab = 0;
  CHECK_THROWS_AS(synth_generate(spec), ConfigError);
}

TEST_SUITE_END();
