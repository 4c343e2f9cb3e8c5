#pragma once

#include <cstdint>

#include "textbias/corpus.hpp"

namespace textbias {

// Synthetic corpora with a known, plantable amount of label and nuisance
// signal. Every (label, nuisance) cell gets exactly per_cell samples, so the
// label/nuisance table is independent by construction. Each text holds
// background tokens drawn from a shared vocabulary, plus a label-revealing
// token with probability label_signal and a source-revealing token with
// probability nuisance_signal.
struct SynthSpec {
  int n_sources = 10;
  int n_labels = 2;
  int per_cell = 100;
  double label_signal = 0.9;     // P(text contains its label's token)
  double nuisance_signal = 0.5;  // P(text contains its source's token)
  int background_tokens = 8;     // tokens per text from the shared vocabulary
  int background_vocab = 100;
  std::uint64_t seed = 0;
};

// Labels are named y0..y{n-1}, sources s0..s{n-1}. Generation is fully
// deterministic in the seed; one uniform draw is consumed per signal token
// whether or not it fires, so corpora with different signal strengths stay
// aligned otherwise.
Dataset synth_generate(const SynthSpec& spec);

}  // namespace textbias
