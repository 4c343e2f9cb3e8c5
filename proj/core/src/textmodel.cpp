#include "textbias/textmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "textbias/errors.hpp"
#include "textbias/rng.hpp"

namespace textbias {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
         (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
}

bool is_space_codepoint(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Decodes one UTF-8 code point starting at i and advances i past it. A
// malformed byte is treated as an opaque one-byte character so tokenization
// never fails on binary junk.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const unsigned char b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  char32_t cp = 0;
  if (b0 < 0x80) {
    ++i;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return b0;
  }
  if (i + len > s.size()) {
    ++i;
    return b0;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char bk = static_cast<unsigned char>(s[i + k]);
    if ((bk & 0xC0) != 0x80) {
      ++i;
      return b0;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += len;
  return cp;
}

// Whitespace-splits, optionally ASCII-lowercases, strips ASCII punctuation
// from token edges, and drops tokens that end up empty.
std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  auto flush = [&]() {
    std::size_t b = 0, e = current.size();
    while (b < e && is_ascii_punct(static_cast<unsigned char>(current[b]))) ++b;
    while (e > b && is_ascii_punct(static_cast<unsigned char>(current[e - 1]))) --e;
    if (e > b) tokens.emplace_back(current.substr(b, e - b));
    current.clear();
  };
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t cp = decode_utf8(text, i);
    if (is_space_codepoint(cp)) {
      flush();
      continue;
    }
    for (std::size_t k = start; k < i; ++k) {
      char c = text[k];
      if (lowercase && c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
      current.push_back(c);
    }
  }
  flush();
  return tokens;
}

std::uint32_t bucket_of(std::uint64_t hash, std::size_t bucket_count) {
  return static_cast<std::uint32_t>(hash % bucket_count);
}

void check_featurizer(const FeaturizerConfig& cfg) {
  if (cfg.bucket_count < 2 || cfg.bucket_count > std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError("bucket_count must be in [2, 2^32)");
  }
}

}  // namespace

std::vector<std::uint32_t> featurize(std::string_view text, const FeaturizerConfig& cfg) {
  check_featurizer(cfg);
  const std::vector<std::string> tokens = tokenize(text, cfg.lowercase);
  std::vector<std::uint32_t> indices;
  indices.reserve(cfg.use_bigrams && tokens.size() > 1 ? 2 * tokens.size() - 1 : tokens.size());
  for (const std::string& t : tokens) {
    indices.push_back(bucket_of(fnv1a64(t), cfg.bucket_count));
  }
  if (cfg.use_bigrams) {
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
      // Hash of "tok1 \x1f tok2" without building the joined string.
      std::uint64_t h = fnv1a64(tokens[i]);
      h = (h ^ 0x1F) * 1099511628211ULL;
      for (unsigned char c : tokens[i + 1]) {
        h ^= c;
        h *= 1099511628211ULL;
      }
      indices.push_back(bucket_of(h, cfg.bucket_count));
    }
  }
  return indices;
}

namespace {

void mean_pool(const std::vector<double>& embeddings, int dim,
               const std::vector<std::uint32_t>& features, double* h) {
  std::fill(h, h + dim, 0.0);
  if (features.empty()) return;
  for (std::uint32_t f : features) {
    const double* row = embeddings.data() + static_cast<std::size_t>(f) * dim;
    for (int d = 0; d < dim; ++d) h[d] += row[d];
  }
  const double inv = 1.0 / static_cast<double>(features.size());
  for (int d = 0; d < dim; ++d) h[d] *= inv;
}

void logits_of(const TrainedClassifier& m, const double* h, double* z) {
  const std::size_t k = m.num_targets();
  for (std::size_t c = 0; c < k; ++c) {
    const double* w = m.head.data() + c * static_cast<std::size_t>(m.dim);
    double acc = m.bias[c];
    for (int d = 0; d < m.dim; ++d) acc += w[d] * h[d];
    z[c] = acc;
  }
}

// Stable softmax; returns log(sum(exp(z - max))) + max for reuse.
double softmax_inplace(double* z, std::size_t k) {
  double zmax = z[0];
  for (std::size_t c = 1; c < k; ++c) zmax = std::max(zmax, z[c]);
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    z[c] = std::exp(z[c] - zmax);
    sum += z[c];
  }
  const double inv = 1.0 / sum;
  for (std::size_t c = 0; c < k; ++c) z[c] *= inv;
  return std::log(sum) + zmax;
}

void check_trainer(const TrainerConfig& cfg) {
  check_featurizer(cfg.featurizer);
  if (cfg.dim <= 0) throw ConfigError("dim must be positive");
  if (cfg.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (cfg.learning_rate <= 0) throw ConfigError("learning_rate must be positive");
}

}  // namespace

TrainedClassifier train_text_classifier(const std::vector<std::string_view>& texts,
                                        const std::vector<int>& targets,
                                        std::vector<std::string> target_space,
                                        const TrainerConfig& cfg, std::uint64_t seed,
                                        std::size_t* skipped) {
  check_trainer(cfg);
  if (texts.size() != targets.size()) throw DataError("texts and targets differ in length");
  if (texts.empty()) throw DataError("cannot train on an empty dataset");
  if (target_space.empty()) throw DataError("target space is empty");
  const int k = static_cast<int>(target_space.size());
  for (int t : targets) {
    if (t < 0 || t >= k) throw DataError("target index " + std::to_string(t) + " out of range");
  }

  std::vector<std::vector<std::uint32_t>> features(texts.size());
  std::vector<std::size_t> usable;
  usable.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    features[i] = featurize(texts[i], cfg.featurizer);
    if (!features[i].empty()) usable.push_back(i);
  }
  if (skipped) *skipped = texts.size() - usable.size();
  if (usable.empty()) throw DataError("no trainable samples: every text has an empty feature set");

  TrainedClassifier m;
  m.featurizer = cfg.featurizer;
  m.dim = cfg.dim;
  m.target_space = std::move(target_space);
  const std::size_t dim = static_cast<std::size_t>(cfg.dim);

  Rng rng(seed);
  m.embeddings.resize(cfg.featurizer.bucket_count * dim);
  const double scale = 1.0 / static_cast<double>(cfg.dim);
  for (double& w : m.embeddings) w = (rng.unit() * 2.0 - 1.0) * scale;
  m.head.assign(static_cast<std::size_t>(k) * dim, 0.0);
  m.bias.assign(static_cast<std::size_t>(k), 0.0);

  const double total_updates = static_cast<double>(cfg.epochs) * static_cast<double>(usable.size());
  std::vector<double> h(dim), dh(dim), z(static_cast<std::size_t>(k));
  std::vector<std::size_t> order;
  std::size_t t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order = usable;
    rng.shuffle(order);
    for (std::size_t i : order) {
      const auto& feats = features[i];
      mean_pool(m.embeddings, cfg.dim, feats, h.data());
      logits_of(m, h.data(), z.data());
      softmax_inplace(z.data(), static_cast<std::size_t>(k));

      const double lr = cfg.learning_rate * (1.0 - static_cast<double>(t) / total_updates);
      const int y = targets[i];

      // Hidden gradient uses the pre-update head.
      std::fill(dh.begin(), dh.end(), 0.0);
      for (int c = 0; c < k; ++c) {
        const double dz = z[static_cast<std::size_t>(c)] - (c == y ? 1.0 : 0.0);
        const double* w = m.head.data() + static_cast<std::size_t>(c) * dim;
        for (std::size_t d = 0; d < dim; ++d) dh[d] += dz * w[d];
      }
      for (int c = 0; c < k; ++c) {
        const double step = lr * (z[static_cast<std::size_t>(c)] - (c == y ? 1.0 : 0.0));
        double* w = m.head.data() + static_cast<std::size_t>(c) * dim;
        for (std::size_t d = 0; d < dim; ++d) w[d] -= step * h[d];
        m.bias[static_cast<std::size_t>(c)] -= step;
      }
      const double emb_step = lr / static_cast<double>(feats.size());
      for (std::uint32_t f : feats) {
        double* row = m.embeddings.data() + static_cast<std::size_t>(f) * dim;
        for (std::size_t d = 0; d < dim; ++d) row[d] -= emb_step * dh[d];
      }
      ++t;
    }
  }
  return m;
}

TrainedClassifier train(const Dataset& d, const TrainerConfig& cfg, std::uint64_t seed,
                        std::size_t* skipped) {
  if (d.empty()) throw DataError("cannot train on an empty dataset");
  std::vector<std::string_view> texts;
  std::vector<int> targets;
  texts.reserve(d.size());
  targets.reserve(d.size());
  for (const Sample& s : d.samples()) {
    texts.push_back(s.text);
    targets.push_back(s.label);
  }
  return train_text_classifier(texts, targets, d.label_space(), cfg, seed, skipped);
}

Prediction predict(const TrainedClassifier& m, std::string_view text) {
  const std::vector<std::uint32_t> feats = featurize(text, m.featurizer);
  const std::size_t dim = static_cast<std::size_t>(m.dim);
  const std::size_t k = m.num_targets();
  std::vector<double> h(dim);
  mean_pool(m.embeddings, m.dim, feats, h.data());
  Prediction out;
  out.probs.resize(k);
  logits_of(m, h.data(), out.probs.data());
  softmax_inplace(out.probs.data(), k);
  out.target = static_cast<int>(
      std::max_element(out.probs.begin(), out.probs.end()) - out.probs.begin());
  return out;
}

std::vector<double> predict_logprobs(const TrainedClassifier& m, std::string_view text) {
  const std::vector<std::uint32_t> feats = featurize(text, m.featurizer);
  const std::size_t dim = static_cast<std::size_t>(m.dim);
  const std::size_t k = m.num_targets();
  std::vector<double> h(dim);
  mean_pool(m.embeddings, m.dim, feats, h.data());
  std::vector<double> z(k);
  logits_of(m, h.data(), z.data());
  double zmax = z[0];
  for (std::size_t c = 1; c < k; ++c) zmax = std::max(zmax, z[c]);
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) sum += std::exp(z[c] - zmax);
  const double lse = std::log(sum) + zmax;
  for (std::size_t c = 0; c < k; ++c) z[c] -= lse;
  return z;
}

std::vector<double> represent(const TrainedClassifier& m, std::string_view text) {
  const std::vector<std::uint32_t> feats = featurize(text, m.featurizer);
  std::vector<double> h(static_cast<std::size_t>(m.dim));
  mean_pool(m.embeddings, m.dim, feats, h.data());
  return h;
}

double accuracy(const TrainedClassifier& m, const Dataset& d) {
  if (d.empty()) throw DataError("cannot evaluate on an empty dataset");
  std::size_t correct = 0;
  for (const Sample& s : d.samples()) {
    if (predict(m, s.text).target == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

namespace {

constexpr std::uint32_t kModelMagic = 0x5442434CU;  // "TBCL"
constexpr std::uint32_t kModelVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    put_u64(out, bits);
  }
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("model file truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw DataError("model file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void get_doubles(std::istream& in, std::vector<double>& v, std::size_t n) {
  v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bits = get_u64(in);
    std::memcpy(&v[i], &bits, 8);
  }
}

}  // namespace

void save_classifier(const TrainedClassifier& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  put_u32(out, kModelMagic);
  put_u32(out, kModelVersion);
  put_u64(out, m.featurizer.bucket_count);
  put_u32(out, m.featurizer.use_bigrams ? 1 : 0);
  put_u32(out, m.featurizer.lowercase ? 1 : 0);
  put_u32(out, static_cast<std::uint32_t>(m.dim));
  put_u32(out, static_cast<std::uint32_t>(m.num_targets()));
  for (const std::string& name : m.target_space) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  put_doubles(out, m.embeddings);
  put_doubles(out, m.head);
  put_doubles(out, m.bias);
  if (!out) throw ConfigError("failed writing " + path);
}

TrainedClassifier load_classifier(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  if (get_u32(in) != kModelMagic) throw DataError(path + ": not a classifier file");
  if (get_u32(in) != kModelVersion) throw DataError(path + ": unsupported version");
  TrainedClassifier m;
  m.featurizer.bucket_count = get_u64(in);
  m.featurizer.use_bigrams = get_u32(in) != 0;
  m.featurizer.lowercase = get_u32(in) != 0;
  m.dim = static_cast<int>(get_u32(in));
  const std::uint32_t k = get_u32(in);
  m.target_space.resize(k);
  for (std::uint32_t c = 0; c < k; ++c) {
    const std::uint32_t len = get_u32(in);
    m.target_space[c].resize(len);
    in.read(m.target_space[c].data(), len);
    if (!in) throw DataError("model file truncated");
  }
  const std::size_t dim = static_cast<std::size_t>(m.dim);
  get_doubles(in, m.embeddings, m.featurizer.bucket_count * dim);
  get_doubles(in, m.head, static_cast<std::size_t>(k) * dim);
  get_doubles(in, m.bias, k);
  in.peek();
  if (!in.eof()) throw DataError(path + ": trailing bytes after model payload");
  return m;
}

double sample_loss(const TrainedClassifier& m, const std::vector<std::uint32_t>& features,
                   int target) {
  const std::size_t dim = static_cast<std::size_t>(m.dim);
  const std::size_t k = m.num_targets();
  if (target < 0 || static_cast<std::size_t>(target) >= k) throw DataError("target out of range");
  std::vector<double> h(dim), z(k);
  mean_pool(m.embeddings, m.dim, features, h.data());
  logits_of(m, h.data(), z.data());
  double zmax = z[0];
  for (std::size_t c = 1; c < k; ++c) zmax = std::max(zmax, z[c]);
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) sum += std::exp(z[c] - zmax);
  return std::log(sum) + zmax - z[static_cast<std::size_t>(target)];
}

ClassifierGradients sample_gradients(const TrainedClassifier& m,
                                     const std::vector<std::uint32_t>& features, int target) {
  const std::size_t dim = static_cast<std::size_t>(m.dim);
  const std::size_t k = m.num_targets();
  if (target < 0 || static_cast<std::size_t>(target) >= k) throw DataError("target out of range");
  std::vector<double> h(dim), p(k);
  mean_pool(m.embeddings, m.dim, features, h.data());
  logits_of(m, h.data(), p.data());
  softmax_inplace(p.data(), k);

  ClassifierGradients g;
  g.head.assign(k * dim, 0.0);
  g.bias.assign(k, 0.0);
  std::vector<double> dh(dim, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const double dz = p[c] - (static_cast<std::size_t>(target) == c ? 1.0 : 0.0);
    g.bias[c] = dz;
    for (std::size_t d = 0; d < dim; ++d) {
      g.head[c * dim + d] = dz * h[d];
      dh[d] += dz * m.head[c * dim + d];
    }
  }
  if (!features.empty()) {
    const double inv = 1.0 / static_cast<double>(features.size());
    for (std::uint32_t f : features) {
      auto [it, inserted] = g.embeddings.try_emplace(f, std::vector<double>(dim, 0.0));
      for (std::size_t d = 0; d < dim; ++d) it->second[d] += dh[d] * inv;
    }
  }
  return g;
}

}  // namespace textbias
