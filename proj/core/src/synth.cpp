#include "textbias/synth.hpp"

#include <string>
#include <vector>

#include "textbias/errors.hpp"
#include "textbias/rng.hpp"

namespace textbias {

Dataset synth_generate(const SynthSpec& spec) {
  if (spec.n_sources < 1 || spec.n_labels < 1 || spec.per_cell < 1) {
    throw ConfigError("n_sources, n_labels and per_cell must be positive");
  }
  if (spec.background_tokens < 0 || spec.background_vocab < 1) {
    throw ConfigError("background_tokens must be >= 0 and background_vocab >= 1");
  }
  if (spec.label_signal < 0.0 || spec.label_signal > 1.0 || spec.nuisance_signal < 0.0 ||
      spec.nuisance_signal > 1.0) {
    throw ConfigError("signal strengths must be in [0, 1]");
  }

  std::vector<std::string> label_space, nuisance_space;
  for (int y = 0; y < spec.n_labels; ++y) label_space.push_back("y" + std::to_string(y));
  for (int s = 0; s < spec.n_sources; ++s) nuisance_space.push_back("s" + std::to_string(s));

  Rng rng(spec.seed);
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(spec.n_sources) *
                  static_cast<std::size_t>(spec.n_labels) *
                  static_cast<std::size_t>(spec.per_cell));
  std::vector<std::string> tokens;
  for (int s = 0; s < spec.n_sources; ++s) {
    for (int y = 0; y < spec.n_labels; ++y) {
      for (int k = 0; k < spec.per_cell; ++k) {
        tokens.clear();
        for (int b = 0; b < spec.background_tokens; ++b) {
          tokens.push_back(
              "w" + std::to_string(rng.below(static_cast<std::uint64_t>(spec.background_vocab))));
        }
        if (rng.unit() < spec.label_signal) tokens.push_back("LBL" + std::to_string(y));
        if (rng.unit() < spec.nuisance_signal) tokens.push_back("SRC" + std::to_string(s));
        if (tokens.empty()) {
          // Texts must be non-empty; fall back to one background token.
          tokens.push_back(
              "w" + std::to_string(rng.below(static_cast<std::uint64_t>(spec.background_vocab))));
        }
        rng.shuffle(tokens);
        std::string text;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
          if (i) text += ' ';
          text += tokens[i];
        }
        Sample sample;
        sample.text = std::move(text);
        sample.label = y;
        sample.nuisance = s;
        samples.push_back(std::move(sample));
      }
    }
  }
  return Dataset(std::move(samples), std::move(label_space), std::move(nuisance_space));
}

}  // namespace textbias
