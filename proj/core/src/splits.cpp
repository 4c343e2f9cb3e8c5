#include "textbias/splits.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "textbias/errors.hpp"
#include "textbias/rng.hpp"

namespace textbias {

namespace {

// Truncation of a non-negative real count, nudged so that values that are
// integral in exact arithmetic (0.3 * 800 = 240) do not round down from
// floating-point representation error.
std::int64_t int_of(double x) {
  return static_cast<std::int64_t>(std::floor(x + 1e-9));
}

void check_balanced(const Dataset& d) {
  for (std::size_t s = 0; s < d.num_nuisances(); ++s) {
    const std::int64_t first = d.count(0, static_cast<int>(s));
    for (std::size_t y = 1; y < d.num_labels(); ++y) {
      if (d.count(static_cast<int>(y), static_cast<int>(s)) != first) {
        throw DataError("nuisance '" + d.nuisance_space()[s] + "' is not label-balanced");
      }
    }
  }
}

}  // namespace

std::pair<Dataset, Dataset> iid_split(const Dataset& d, double test_fraction,
                                      std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0) {
    throw ConfigError("test_fraction must be in (0, 1)");
  }
  if (d.empty()) throw DataError("cannot split an empty dataset");
  const auto cells = cell_indices(d);
  Rng rng(seed);
  std::vector<char> in_test(d.size(), 0);
  for (std::size_t y = 0; y < d.num_labels(); ++y) {
    for (std::size_t s = 0; s < d.num_nuisances(); ++s) {
      const auto& cell = cells[y][s];
      if (cell.size() < 2) {
        throw DataError("cell (" + d.label_space()[y] + ", " + d.nuisance_space()[s] +
                        ") has fewer than two samples");
      }
      const std::size_t n_test =
          static_cast<std::size_t>(int_of(test_fraction * static_cast<double>(cell.size())));
      for (std::size_t pos : rng.sample_indices(cell.size(), n_test)) {
        in_test[cell[pos]] = 1;
      }
    }
  }
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < d.size(); ++i) {
    (in_test[i] ? test_idx : train_idx).push_back(i);
  }
  return {take_samples(d, train_idx), take_samples(d, test_idx)};
}

SplitResult gtb_split(const Dataset& d, double beta, std::uint64_t seed,
                      double test_fraction) {
  if (beta < 0.5 || beta > 1.0) throw ConfigError("beta must be in [0.5, 1]");
  const std::size_t n_labels = d.num_labels();
  const std::size_t n_nuisances = d.num_nuisances();
  if (n_labels < 2) throw DataError("need at least two labels");
  if (n_nuisances < n_labels) throw DataError("need at least |Y| nuisance values");
  check_balanced(d);

  auto [train_pool, test_pool] = iid_split(d, test_fraction, derived_seed(seed, 0));

  // Halve the test pool per cell: one half stays unbiased for test_shifted,
  // the other is biased below into test_same. This keeps all three outputs
  // disjoint.
  Rng halver(derived_seed(seed, 1));
  {
    const auto cells = cell_indices(test_pool);
    std::vector<char> to_shifted(test_pool.size(), 0);
    for (std::size_t y = 0; y < n_labels; ++y) {
      for (std::size_t s = 0; s < n_nuisances; ++s) {
        const auto& cell = cells[y][s];
        for (std::size_t pos : halver.sample_indices(cell.size(), cell.size() / 2)) {
          to_shifted[cell[pos]] = 1;
        }
      }
    }
    std::vector<std::size_t> shifted_idx, same_idx;
    for (std::size_t i = 0; i < test_pool.size(); ++i) {
      (to_shifted[i] ? shifted_idx : same_idx).push_back(i);
    }
    Dataset shifted_pool = take_samples(test_pool, shifted_idx);
    Dataset same_pool = take_samples(test_pool, same_idx);
    test_pool = Dataset{};  // large and no longer needed

    Rng rng(derived_seed(seed, 2));
    std::vector<int> source_order(n_nuisances);
    std::iota(source_order.begin(), source_order.end(), 0);
    rng.shuffle(source_order);

    GtbPlan plan;
    plan.beta = beta;
    plan.seed = seed;
    plan.test_fraction = test_fraction;
    plan.favored.assign(n_nuisances, -1);
    const std::size_t n_groups = n_nuisances / n_labels;
    for (std::size_t i = n_groups * n_labels; i < n_nuisances; ++i) {
      plan.dropped_sources.push_back(source_order[i]);
    }
    std::sort(plan.dropped_sources.begin(), plan.dropped_sources.end());

    const auto train_cells = cell_indices(train_pool);
    const auto same_cells = cell_indices(same_pool);
    std::vector<std::size_t> train_keep, same_keep;

    const double other_share = n_labels > 1 ? (1.0 - beta) / static_cast<double>(n_labels - 1) : 0.0;
    for (std::size_t g = 0; g < n_groups; ++g) {
      std::vector<int> group(source_order.begin() + static_cast<std::ptrdiff_t>(g * n_labels),
                             source_order.begin() + static_cast<std::ptrdiff_t>((g + 1) * n_labels));
      std::vector<int> label_perm(n_labels);
      std::iota(label_perm.begin(), label_perm.end(), 0);
      rng.shuffle(label_perm);
      for (std::size_t j = 0; j < n_labels; ++j) {
        plan.favored[static_cast<std::size_t>(group[j])] = label_perm[j];
      }

      auto min_cell = [&](const Dataset& pool) {
        std::int64_t n = std::numeric_limits<std::int64_t>::max();
        for (int s : group) {
          for (std::size_t y = 0; y < n_labels; ++y) {
            n = std::min(n, pool.count(static_cast<int>(y), s));
          }
        }
        return n;
      };

      const std::int64_t n_train = min_cell(train_pool);
      const std::int64_t n_same = min_cell(same_pool);
      for (int s : group) {
        const int favored_label = plan.favored[static_cast<std::size_t>(s)];
        for (std::size_t y = 0; y < n_labels; ++y) {
          const bool is_favored = static_cast<int>(y) == favored_label;
          const std::int64_t want_train =
              int_of((is_favored ? beta : other_share) * static_cast<double>(n_train));
          const auto& tc = train_cells[y][static_cast<std::size_t>(s)];
          for (std::size_t pos :
               rng.sample_indices(tc.size(), static_cast<std::size_t>(want_train))) {
            train_keep.push_back(tc[pos]);
          }
          const std::int64_t want_same =
              int_of((is_favored ? beta : other_share) * static_cast<double>(n_same));
          const auto& sc = same_cells[y][static_cast<std::size_t>(s)];
          for (std::size_t pos :
               rng.sample_indices(sc.size(), static_cast<std::size_t>(want_same))) {
            same_keep.push_back(sc[pos]);
          }
        }
      }
      plan.groups.push_back(std::move(group));
    }

    std::sort(train_keep.begin(), train_keep.end());
    std::sort(same_keep.begin(), same_keep.end());

    std::vector<std::size_t> shifted_keep;
    for (std::size_t i = 0; i < shifted_pool.size(); ++i) {
      if (plan.favored[static_cast<std::size_t>(shifted_pool.samples()[i].nuisance)] >= 0) {
        shifted_keep.push_back(i);
      }
    }

    SplitResult out;
    out.train = take_samples(train_pool, train_keep);
    out.test_shifted = take_samples(shifted_pool, shifted_keep);
    out.test_same = take_samples(same_pool, same_keep);
    out.plan = std::move(plan);
    return out;
  }
}

SplitResult gu_split(const Dataset& d, std::size_t k_unknown, std::uint64_t seed,
                     double holdout_fraction) {
  if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0) {
    throw ConfigError("holdout_fraction must be in (0, 1)");
  }
  const std::size_t n_nuisances = d.num_nuisances();
  if (k_unknown == 0 || k_unknown >= n_nuisances) {
    throw ConfigError("k_unknown must be in [1, |S| - 1]");
  }
  if (d.empty()) throw DataError("cannot split an empty dataset");

  Rng rng(derived_seed(seed, 0));
  std::vector<int> order(n_nuisances);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  GuPlan plan;
  plan.seed = seed;
  plan.holdout_fraction = holdout_fraction;
  plan.k_unknown = k_unknown;
  plan.unknown_sources.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_unknown));
  plan.known_sources.assign(order.begin() + static_cast<std::ptrdiff_t>(k_unknown), order.end());
  std::sort(plan.unknown_sources.begin(), plan.unknown_sources.end());
  std::sort(plan.known_sources.begin(), plan.known_sources.end());

  std::vector<char> is_unknown(n_nuisances, 0);
  for (int s : plan.unknown_sources) is_unknown[static_cast<std::size_t>(s)] = 1;

  const auto cells = cell_indices(d);
  Rng hold_rng(derived_seed(seed, 1));
  std::vector<char> part(d.size(), 0);  // 0 = train, 1 = test_same, 2 = test_shifted
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (is_unknown[static_cast<std::size_t>(d.samples()[i].nuisance)]) part[i] = 2;
  }
  for (std::size_t y = 0; y < d.num_labels(); ++y) {
    for (std::size_t s = 0; s < n_nuisances; ++s) {
      if (is_unknown[s]) continue;
      const auto& cell = cells[y][s];
      const std::size_t n_eval =
          static_cast<std::size_t>(int_of(holdout_fraction * static_cast<double>(cell.size())));
      for (std::size_t pos : hold_rng.sample_indices(cell.size(), n_eval)) {
        part[cell[pos]] = 1;
      }
    }
  }

  std::vector<std::size_t> train_idx, same_idx, shifted_idx;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (part[i] == 0) train_idx.push_back(i);
    else if (part[i] == 1) same_idx.push_back(i);
    else shifted_idx.push_back(i);
  }
  if (train_idx.empty()) throw DataError("group-unseen split left the train side empty");
  if (shifted_idx.empty()) throw DataError("unknown sources carry no samples");

  SplitResult out;
  out.train = take_samples(d, train_idx);
  out.test_same = take_samples(d, same_idx);
  out.test_shifted = take_samples(d, shifted_idx);
  out.plan = std::move(plan);
  return out;
}

namespace {

using nlohmann::json;

json plan_to_json(const SplitResult& sr) {
  const auto& space = sr.train.nuisance_space();
  json j;
  if (std::holds_alternative<GtbPlan>(sr.plan)) {
    const GtbPlan& p = std::get<GtbPlan>(sr.plan);
    j["kind"] = "gtb";
    j["beta"] = p.beta;
    j["seed"] = std::to_string(p.seed);
    j["test_fraction"] = p.test_fraction;
    json favored = json::object();
    for (std::size_t s = 0; s < p.favored.size(); ++s) {
      if (p.favored[s] >= 0) favored[space[s]] = p.favored[s];
    }
    j["favored"] = std::move(favored);
    json dropped = json::array();
    for (int s : p.dropped_sources) dropped.push_back(space[static_cast<std::size_t>(s)]);
    j["dropped_sources"] = std::move(dropped);
    json groups = json::array();
    for (const auto& g : p.groups) {
      json names = json::array();
      for (int s : g) names.push_back(space[static_cast<std::size_t>(s)]);
      groups.push_back(std::move(names));
    }
    j["groups"] = std::move(groups);
  } else {
    const GuPlan& p = std::get<GuPlan>(sr.plan);
    j["kind"] = "gu";
    j["seed"] = std::to_string(p.seed);
    j["holdout_fraction"] = p.holdout_fraction;
    j["k_unknown"] = p.k_unknown;
    json known = json::array(), unknown = json::array();
    for (int s : p.known_sources) known.push_back(space[static_cast<std::size_t>(s)]);
    for (int s : p.unknown_sources) unknown.push_back(space[static_cast<std::size_t>(s)]);
    j["known_sources"] = std::move(known);
    j["unknown_sources"] = std::move(unknown);
  }
  return j;
}

// Rebuilds a dataset against shared spaces, matching nuisances by name.
Dataset remap_dataset(const Dataset& d, const std::vector<std::string>& label_space,
                      const std::vector<std::string>& nuisance_space,
                      const std::unordered_map<std::string, int>& nuisance_index) {
  std::vector<Sample> samples = d.samples();
  for (Sample& s : samples) {
    s.nuisance = nuisance_index.at(d.nuisance_space()[static_cast<std::size_t>(s.nuisance)]);
  }
  return Dataset(std::move(samples), label_space, nuisance_space);
}

}  // namespace

void write_split_dir(const SplitResult& sr, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_jsonl(sr.train, dir + "/train.jsonl");
  write_jsonl(sr.test_shifted, dir + "/test_shifted.jsonl");
  write_jsonl(sr.test_same, dir + "/test_same.jsonl");
  std::ofstream out(dir + "/plan.json");
  if (!out) throw ConfigError("cannot open " + dir + "/plan.json for writing");
  out << plan_to_json(sr).dump(2) << '\n';
  if (!out) throw ConfigError("failed writing " + dir + "/plan.json");
}

SplitResult load_split_dir(const std::string& dir) {
  Dataset train = read_labeled_jsonl(dir + "/train.jsonl");
  Dataset shifted = read_labeled_jsonl(dir + "/test_shifted.jsonl");
  Dataset same = read_labeled_jsonl(dir + "/test_same.jsonl");

  std::ifstream in(dir + "/plan.json");
  if (!in) throw ConfigError("cannot open " + dir + "/plan.json");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(dir + "/plan.json: invalid JSON: " + e.what());
  }

  // Shared label space: large enough for every part.
  std::size_t n_labels = 0;
  for (const Dataset* d : {&train, &shifted, &same}) n_labels = std::max(n_labels, d->num_labels());
  std::vector<std::string> label_space;
  for (std::size_t y = 0; y < n_labels; ++y) label_space.push_back(std::to_string(y));

  // Shared nuisance space: first-seen across the parts, then any sources the
  // plan mentions that carry no samples (dropped ones, typically).
  std::vector<std::string> nuisance_space;
  std::unordered_map<std::string, int> nuisance_index;
  auto add_name = [&](const std::string& name) {
    auto [it, inserted] = nuisance_index.emplace(name, static_cast<int>(nuisance_space.size()));
    if (inserted) nuisance_space.push_back(name);
    return it->second;
  };
  for (const Dataset* d : {&train, &shifted, &same}) {
    for (const std::string& name : d->nuisance_space()) add_name(name);
  }
  std::vector<std::string> plan_names;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gtb") {
    for (auto& [name, value] : j.at("favored").items()) plan_names.push_back(name);
    for (const auto& name : j.at("dropped_sources")) plan_names.push_back(name.get<std::string>());
  } else if (kind == "gu") {
    for (const auto& name : j.at("known_sources")) plan_names.push_back(name.get<std::string>());
    for (const auto& name : j.at("unknown_sources")) plan_names.push_back(name.get<std::string>());
  } else {
    throw DataError(dir + "/plan.json: unknown split kind '" + kind + "'");
  }
  for (const std::string& name : plan_names) add_name(name);

  SplitResult out;
  out.train = remap_dataset(train, label_space, nuisance_space, nuisance_index);
  out.test_shifted = remap_dataset(shifted, label_space, nuisance_space, nuisance_index);
  out.test_same = remap_dataset(same, label_space, nuisance_space, nuisance_index);

  if (kind == "gtb") {
    GtbPlan p;
    p.beta = j.at("beta").get<double>();
    p.seed = std::stoull(j.at("seed").get<std::string>());
    p.test_fraction = j.at("test_fraction").get<double>();
    p.favored.assign(nuisance_space.size(), -1);
    for (auto& [name, value] : j.at("favored").items()) {
      p.favored[static_cast<std::size_t>(nuisance_index.at(name))] = value.get<int>();
    }
    for (const auto& name : j.at("dropped_sources")) {
      p.dropped_sources.push_back(nuisance_index.at(name.get<std::string>()));
    }
    std::sort(p.dropped_sources.begin(), p.dropped_sources.end());
    for (const auto& group : j.at("groups")) {
      std::vector<int> g;
      for (const auto& name : group) g.push_back(nuisance_index.at(name.get<std::string>()));
      p.groups.push_back(std::move(g));
    }
    out.plan = std::move(p);
  } else {
    GuPlan p;
    p.seed = std::stoull(j.at("seed").get<std::string>());
    p.holdout_fraction = j.at("holdout_fraction").get<double>();
    p.k_unknown = j.at("k_unknown").get<std::size_t>();
    for (const auto& name : j.at("known_sources")) {
      p.known_sources.push_back(nuisance_index.at(name.get<std::string>()));
    }
    for (const auto& name : j.at("unknown_sources")) {
      p.unknown_sources.push_back(nuisance_index.at(name.get<std::string>()));
    }
    std::sort(p.known_sources.begin(), p.known_sources.end());
    std::sort(p.unknown_sources.begin(), p.unknown_sources.end());
    out.plan = std::move(p);
  }
  return out;
}

}  // namespace textbias
