#include "textbias/probe.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "textbias/errors.hpp"
#include "textbias/rng.hpp"

namespace textbias {

namespace {

void he_uniform(std::vector<double>& w, std::size_t rows, std::size_t fan_in, Rng& rng) {
  w.resize(rows * fan_in);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& x : w) x = (rng.unit() * 2.0 - 1.0) * limit;
}

struct Workspace {
  std::vector<double> z1, a1, z2, a2, z3, p;
  std::vector<double> da1, dz1, da2, dz2, dz3;
};

// Forward pass for one representation; fills ws.z1..ws.p and returns the
// log-sum-exp of the output logits.
double forward_one(const TrainedProbe& m, const double* x, Workspace& ws) {
  const std::size_t in = static_cast<std::size_t>(m.input_dim);
  const std::size_t h1 = static_cast<std::size_t>(m.hidden1);
  const std::size_t h2 = static_cast<std::size_t>(m.hidden2);
  const std::size_t k = m.num_targets();
  ws.z1.resize(h1);
  ws.a1.resize(h1);
  ws.z2.resize(h2);
  ws.a2.resize(h2);
  ws.z3.resize(k);
  ws.p.resize(k);
  for (std::size_t j = 0; j < h1; ++j) {
    const double* w = m.w1.data() + j * in;
    double acc = m.b1[j];
    for (std::size_t d = 0; d < in; ++d) acc += w[d] * x[d];
    ws.z1[j] = acc;
    ws.a1[j] = acc > 0.0 ? acc : 0.0;
  }
  for (std::size_t j = 0; j < h2; ++j) {
    const double* w = m.w2.data() + j * h1;
    double acc = m.b2[j];
    for (std::size_t d = 0; d < h1; ++d) acc += w[d] * ws.a1[d];
    ws.z2[j] = acc;
    ws.a2[j] = acc > 0.0 ? acc : 0.0;
  }
  for (std::size_t c = 0; c < k; ++c) {
    const double* w = m.w3.data() + c * h2;
    double acc = m.b3[c];
    for (std::size_t d = 0; d < h2; ++d) acc += w[d] * ws.a2[d];
    ws.z3[c] = acc;
  }
  double zmax = ws.z3[0];
  for (std::size_t c = 1; c < k; ++c) zmax = std::max(zmax, ws.z3[c]);
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    ws.p[c] = std::exp(ws.z3[c] - zmax);
    sum += ws.p[c];
  }
  const double inv = 1.0 / sum;
  for (std::size_t c = 0; c < k; ++c) ws.p[c] *= inv;
  return std::log(sum) + zmax;
}

void zero_gradients(const TrainedProbe& m, ProbeGradients& g) {
  g.w1.assign(m.w1.size(), 0.0);
  g.b1.assign(m.b1.size(), 0.0);
  g.w2.assign(m.w2.size(), 0.0);
  g.b2.assign(m.b2.size(), 0.0);
  g.w3.assign(m.w3.size(), 0.0);
  g.b3.assign(m.b3.size(), 0.0);
}

// Accumulates loss and gradients of one sample into g (unscaled sums).
double backprop_one(const TrainedProbe& m, const double* x, int target, Workspace& ws,
                    ProbeGradients& g) {
  const std::size_t in = static_cast<std::size_t>(m.input_dim);
  const std::size_t h1 = static_cast<std::size_t>(m.hidden1);
  const std::size_t h2 = static_cast<std::size_t>(m.hidden2);
  const std::size_t k = m.num_targets();
  const double lse = forward_one(m, x, ws);
  const double loss = lse - ws.z3[static_cast<std::size_t>(target)];

  ws.dz3.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    ws.dz3[c] = ws.p[c] - (static_cast<std::size_t>(target) == c ? 1.0 : 0.0);
  }
  ws.da2.assign(h2, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const double dz = ws.dz3[c];
    g.b3[c] += dz;
    double* gw = g.w3.data() + c * h2;
    const double* w = m.w3.data() + c * h2;
    for (std::size_t j = 0; j < h2; ++j) {
      gw[j] += dz * ws.a2[j];
      ws.da2[j] += dz * w[j];
    }
  }
  ws.dz2.resize(h2);
  for (std::size_t j = 0; j < h2; ++j) ws.dz2[j] = ws.z2[j] > 0.0 ? ws.da2[j] : 0.0;
  ws.da1.assign(h1, 0.0);
  for (std::size_t j = 0; j < h2; ++j) {
    const double dz = ws.dz2[j];
    if (dz == 0.0) continue;
    g.b2[j] += dz;
    double* gw = g.w2.data() + j * h1;
    const double* w = m.w2.data() + j * h1;
    for (std::size_t i = 0; i < h1; ++i) {
      gw[i] += dz * ws.a1[i];
      ws.da1[i] += dz * w[i];
    }
  }
  ws.dz1.resize(h1);
  for (std::size_t j = 0; j < h1; ++j) ws.dz1[j] = ws.z1[j] > 0.0 ? ws.da1[j] : 0.0;
  for (std::size_t j = 0; j < h1; ++j) {
    const double dz = ws.dz1[j];
    if (dz == 0.0) continue;
    g.b1[j] += dz;
    double* gw = g.w1.data() + j * in;
    for (std::size_t d = 0; d < in; ++d) gw[d] += dz * x[d];
  }
  return loss;
}

void scale_gradients(ProbeGradients& g, double factor) {
  for (auto* block : {&g.w1, &g.b1, &g.w2, &g.b2, &g.w3, &g.b3}) {
    for (double& x : *block) x *= factor;
  }
}

struct AdamState {
  std::vector<double> m, v;
  double beta1_t = 1.0;
  double beta2_t = 1.0;
};

void adam_step(std::vector<double>& w, const std::vector<double>& g, AdamState& st,
               const AdamConfig& cfg) {
  const double bc1 = 1.0 - st.beta1_t;
  const double bc2 = 1.0 - st.beta2_t;
  for (std::size_t i = 0; i < w.size(); ++i) {
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g[i];
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    w[i] -= cfg.step * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

void validate_reps(const std::vector<std::vector<double>>& reps, const std::vector<int>& targets,
                   std::size_t num_targets) {
  if (reps.empty()) throw DataError("no representations given");
  if (reps.size() != targets.size()) throw DataError("reps and targets differ in length");
  const std::size_t dim = reps.front().size();
  if (dim == 0) throw DataError("zero-dimensional representation");
  for (const auto& r : reps) {
    if (r.size() != dim) throw DataError("inconsistent representation dimensions");
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= num_targets) {
      throw DataError("target index " + std::to_string(t) + " out of range");
    }
  }
}

}  // namespace

TrainedProbe init_probe(int input_dim, int hidden1, int hidden2,
                        std::vector<std::string> target_space, std::uint64_t seed) {
  if (input_dim <= 0 || hidden1 <= 0 || hidden2 <= 0) {
    throw ConfigError("probe dimensions must be positive");
  }
  if (target_space.empty()) throw DataError("target space is empty");
  TrainedProbe p;
  p.input_dim = input_dim;
  p.hidden1 = hidden1;
  p.hidden2 = hidden2;
  p.target_space = std::move(target_space);
  Rng rng(seed);
  he_uniform(p.w1, static_cast<std::size_t>(hidden1), static_cast<std::size_t>(input_dim), rng);
  he_uniform(p.w2, static_cast<std::size_t>(hidden2), static_cast<std::size_t>(hidden1), rng);
  he_uniform(p.w3, p.target_space.size(), static_cast<std::size_t>(hidden2), rng);
  p.b1.assign(static_cast<std::size_t>(hidden1), 0.0);
  p.b2.assign(static_cast<std::size_t>(hidden2), 0.0);
  p.b3.assign(p.target_space.size(), 0.0);
  return p;
}

std::vector<double> probe_forward(const TrainedProbe& p, const std::vector<double>& rep) {
  if (rep.size() != static_cast<std::size_t>(p.input_dim)) {
    throw DataError("representation dimension mismatch");
  }
  Workspace ws;
  forward_one(p, rep.data(), ws);
  return ws.p;
}

int probe_predict(const TrainedProbe& p, const std::vector<double>& rep) {
  const std::vector<double> probs = probe_forward(p, rep);
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

TrainedProbe train_probe(const std::vector<std::vector<double>>& reps,
                         const std::vector<int>& targets,
                         std::vector<std::string> target_space, const ProbeConfig& cfg) {
  if (cfg.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be positive");
  if (target_space.empty()) throw DataError("target space is empty");
  validate_reps(reps, targets, target_space.size());

  TrainedProbe p = init_probe(static_cast<int>(reps.front().size()), cfg.hidden1, cfg.hidden2,
                              std::move(target_space), cfg.seed);

  AdamState s1, s2, s3, s1b, s2b, s3b;
  auto init_state = [](AdamState& st, std::size_t n) {
    st.m.assign(n, 0.0);
    st.v.assign(n, 0.0);
  };
  init_state(s1, p.w1.size());
  init_state(s1b, p.b1.size());
  init_state(s2, p.w2.size());
  init_state(s2b, p.b2.size());
  init_state(s3, p.w3.size());
  init_state(s3b, p.b3.size());

  Rng shuffle_rng(derived_seed(cfg.seed, 1));
  std::vector<std::size_t> order(reps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  Workspace ws;
  ProbeGradients g;
  double beta1_t = 1.0, beta2_t = 1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      zero_gradients(p, g);
      for (std::size_t i = start; i < end; ++i) {
        backprop_one(p, reps[order[i]].data(), targets[order[i]], ws, g);
      }
      scale_gradients(g, 1.0 / static_cast<double>(end - start));
      beta1_t *= cfg.adam.beta1;
      beta2_t *= cfg.adam.beta2;
      for (AdamState* st : {&s1, &s1b, &s2, &s2b, &s3, &s3b}) {
        st->beta1_t = beta1_t;
        st->beta2_t = beta2_t;
      }
      adam_step(p.w1, g.w1, s1, cfg.adam);
      adam_step(p.b1, g.b1, s1b, cfg.adam);
      adam_step(p.w2, g.w2, s2, cfg.adam);
      adam_step(p.b2, g.b2, s2b, cfg.adam);
      adam_step(p.w3, g.w3, s3, cfg.adam);
      adam_step(p.b3, g.b3, s3b, cfg.adam);
    }
  }
  return p;
}

double probe_accuracy(const TrainedProbe& p, const std::vector<std::vector<double>>& reps,
                      const std::vector<int>& targets) {
  validate_reps(reps, targets, p.num_targets());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    if (probe_predict(p, reps[i]) == targets[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(reps.size());
}

double probe_batch_loss(const TrainedProbe& p, const std::vector<std::vector<double>>& reps,
                        const std::vector<int>& targets) {
  validate_reps(reps, targets, p.num_targets());
  Workspace ws;
  double total = 0.0;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const double lse = forward_one(p, reps[i].data(), ws);
    total += lse - ws.z3[static_cast<std::size_t>(targets[i])];
  }
  return total / static_cast<double>(reps.size());
}

ProbeGradients probe_batch_gradients(const TrainedProbe& p,
                                     const std::vector<std::vector<double>>& reps,
                                     const std::vector<int>& targets) {
  validate_reps(reps, targets, p.num_targets());
  Workspace ws;
  ProbeGradients g;
  zero_gradients(p, g);
  for (std::size_t i = 0; i < reps.size(); ++i) {
    backprop_one(p, reps[i].data(), targets[i], ws, g);
  }
  scale_gradients(g, 1.0 / static_cast<double>(reps.size()));
  return g;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    const std::vector<int>& targets, double eval_fraction, std::uint64_t seed) {
  if (eval_fraction <= 0.0 || eval_fraction >= 1.0) {
    throw ConfigError("eval_fraction must be in (0, 1)");
  }
  if (targets.empty()) throw DataError("no targets to split");
  int max_target = 0;
  for (int t : targets) {
    if (t < 0) throw DataError("negative target index");
    max_target = std::max(max_target, t);
  }
  std::vector<std::vector<std::size_t>> by_target(static_cast<std::size_t>(max_target) + 1);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    by_target[static_cast<std::size_t>(targets[i])].push_back(i);
  }
  Rng rng(seed);
  std::vector<std::size_t> train_idx, eval_idx;
  for (auto& group : by_target) {
    rng.shuffle(group);
    const std::size_t n_eval =
        static_cast<std::size_t>(std::floor(eval_fraction * static_cast<double>(group.size())));
    for (std::size_t i = 0; i < group.size(); ++i) {
      (i < n_eval ? eval_idx : train_idx).push_back(group[i]);
    }
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(eval_idx.begin(), eval_idx.end());
  return {std::move(train_idx), std::move(eval_idx)};
}

}  // namespace textbias
