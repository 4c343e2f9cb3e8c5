#include "textbias/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "textbias/errors.hpp"
#include "textbias/rng.hpp"

namespace textbias {

namespace {

bool only_whitespace(const std::string& text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  });
}

}  // namespace

Dataset::Dataset(std::vector<Sample> samples, std::vector<std::string> label_space,
                 std::vector<std::string> nuisance_space)
    : samples_(std::move(samples)),
      label_space_(std::move(label_space)),
      nuisance_space_(std::move(nuisance_space)),
      counts_(label_space_.size() * nuisance_space_.size(), 0) {
  const int n_labels = static_cast<int>(label_space_.size());
  const int n_nuisances = static_cast<int>(nuisance_space_.size());
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const Sample& s = samples_[i];
    if (s.label < 0 || s.label >= n_labels) {
      throw DataError("sample " + std::to_string(i) + ": label index " +
                      std::to_string(s.label) + " outside label space of size " +
                      std::to_string(n_labels));
    }
    if (s.nuisance < 0 || s.nuisance >= n_nuisances) {
      throw DataError("sample " + std::to_string(i) + ": nuisance index " +
                      std::to_string(s.nuisance) + " outside nuisance space of size " +
                      std::to_string(n_nuisances));
    }
    if (only_whitespace(s.text)) {
      throw DataError("sample " + std::to_string(i) + ": text is empty");
    }
    ++counts_[static_cast<std::size_t>(s.label) * nuisance_space_.size() +
              static_cast<std::size_t>(s.nuisance)];
  }
}

std::int64_t ContingencyTable::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ContingencyTable::row_total(std::size_t r) const {
  std::int64_t t = 0;
  for (std::size_t c = 0; c < cols; ++c) t += at(r, c);
  return t;
}

std::int64_t ContingencyTable::col_total(std::size_t c) const {
  std::int64_t t = 0;
  for (std::size_t r = 0; r < rows; ++r) t += at(r, c);
  return t;
}

namespace {

using nlohmann::json;

// Applies fn to every non-blank line; fn gets the 1-based line number and the
// parsed JSON object. Parse failures become ParseError.
template <typename Fn>
void for_each_record(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_number, std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object()) throw ParseError(line_number, "record is not a JSON object");
    fn(line_number, record);
  }
}

// Resolves a field name against the first record: explicit names must exist,
// empty names fall back through the candidate list.
std::string resolve_field(const json& first, const std::string& configured,
                          const std::vector<std::string>& candidates,
                          const std::string& role) {
  if (!configured.empty()) {
    if (!first.contains(configured)) {
      throw ConfigError("configured " + role + " field '" + configured +
                        "' not present in first record");
    }
    return configured;
  }
  for (const std::string& c : candidates) {
    if (first.contains(c)) return c;
  }
  std::string tried;
  for (const std::string& c : candidates) tried += (tried.empty() ? "" : ", ") + c;
  throw ConfigError("no " + role + " field found in first record (tried: " + tried + ")");
}

int parse_rating(const json& value, std::size_t line_number) {
  double v = 0;
  if (value.is_number_integer() || value.is_number_unsigned()) {
    v = value.get<double>();
  } else if (value.is_number_float()) {
    v = value.get<double>();
    if (v != std::floor(v)) {
      throw ParseError(line_number, "rating " + std::to_string(v) + " is not integral");
    }
  } else {
    throw ParseError(line_number, "rating is not a number");
  }
  const int rating = static_cast<int>(v);
  if (rating < 1 || rating > 5) {
    throw ParseError(line_number, "rating " + std::to_string(rating) + " outside 1..5");
  }
  return rating;
}

}  // namespace

Dataset ingest_reviews(const std::string& path, const ReviewFields& fields) {
  std::vector<Sample> samples;
  std::vector<std::string> nuisance_space;
  std::unordered_map<std::string, int> nuisance_index;

  bool resolved = false;
  std::string rating_field, nuisance_field, text_field;

  for_each_record(path, [&](std::size_t line_number, const json& record) {
    if (!resolved) {
      rating_field = resolve_field(record, fields.rating, {"stars", "overall"}, "rating");
      nuisance_field =
          resolve_field(record, fields.nuisance, {"business_id", "asin"}, "nuisance");
      text_field = resolve_field(record, fields.text, {"text"}, "text");
      resolved = true;
    }
    for (const std::string& f : {rating_field, nuisance_field, text_field}) {
      if (!record.contains(f)) throw ParseError(line_number, "missing field '" + f + "'");
    }
    const int rating = parse_rating(record.at(rating_field), line_number);
    if (!record.at(nuisance_field).is_string()) {
      throw ParseError(line_number, "field '" + nuisance_field + "' is not a string");
    }
    if (!record.at(text_field).is_string()) {
      throw ParseError(line_number, "field '" + text_field + "' is not a string");
    }
    std::string nuisance = record.at(nuisance_field).get<std::string>();
    std::string text = record.at(text_field).get<std::string>();
    if (only_whitespace(text)) throw ParseError(line_number, "text is empty");

    auto [it, inserted] =
        nuisance_index.emplace(std::move(nuisance), static_cast<int>(nuisance_space.size()));
    if (inserted) nuisance_space.push_back(it->first);

    Sample s;
    s.text = std::move(text);
    s.label = rating <= 3 ? 0 : 1;
    s.nuisance = it->second;
    samples.push_back(std::move(s));
  });

  if (samples.empty()) return Dataset{};
  return Dataset(std::move(samples), {"negative", "positive"}, std::move(nuisance_space));
}

Dataset read_labeled_jsonl(const std::string& path) {
  std::vector<Sample> samples;
  std::vector<std::string> nuisance_space;
  std::unordered_map<std::string, int> nuisance_index;
  int max_label = -1;

  for_each_record(path, [&](std::size_t line_number, const json& record) {
    for (const char* f : {"label", "nuisance", "text"}) {
      if (!record.contains(f)) throw ParseError(line_number, std::string("missing field '") + f + "'");
    }
    if (!record.at("label").is_number_integer() && !record.at("label").is_number_unsigned()) {
      throw ParseError(line_number, "field 'label' is not an integer");
    }
    const std::int64_t label = record.at("label").get<std::int64_t>();
    if (label < 0) throw ParseError(line_number, "field 'label' is negative");
    if (!record.at("nuisance").is_string()) {
      throw ParseError(line_number, "field 'nuisance' is not a string");
    }
    if (!record.at("text").is_string()) {
      throw ParseError(line_number, "field 'text' is not a string");
    }
    std::string nuisance = record.at("nuisance").get<std::string>();
    std::string text = record.at("text").get<std::string>();
    if (only_whitespace(text)) throw ParseError(line_number, "text is empty");

    auto [it, inserted] =
        nuisance_index.emplace(std::move(nuisance), static_cast<int>(nuisance_space.size()));
    if (inserted) nuisance_space.push_back(it->first);
    max_label = std::max(max_label, static_cast<int>(label));

    Sample s;
    s.text = std::move(text);
    s.label = static_cast<int>(label);
    s.nuisance = it->second;
    samples.push_back(std::move(s));
  });

  if (samples.empty()) return Dataset{};
  std::vector<std::string> label_space;
  for (int y = 0; y <= max_label; ++y) label_space.push_back(std::to_string(y));
  return Dataset(std::move(samples), std::move(label_space), std::move(nuisance_space));
}

void write_jsonl(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  for (const Sample& s : d.samples()) {
    json record;
    record["label"] = s.label;
    record["nuisance"] = d.nuisance_space()[static_cast<std::size_t>(s.nuisance)];
    record["text"] = s.text;
    out << record.dump() << '\n';
  }
  if (!out) throw ConfigError("failed writing " + path);
}

Dataset select_top_nuisances(const Dataset& d, std::size_t k) {
  if (k == 0) throw ConfigError("k must be positive");
  const std::size_t n_nuisances = d.num_nuisances();
  if (k >= n_nuisances) return d;

  std::vector<std::int64_t> totals(n_nuisances, 0);
  for (const Sample& s : d.samples()) ++totals[static_cast<std::size_t>(s.nuisance)];

  std::vector<int> order(n_nuisances);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (totals[static_cast<std::size_t>(a)] != totals[static_cast<std::size_t>(b)]) {
      return totals[static_cast<std::size_t>(a)] > totals[static_cast<std::size_t>(b)];
    }
    return a < b;  // ties go to the first-seen value
  });
  order.resize(k);
  std::sort(order.begin(), order.end());  // keep original relative order

  std::vector<int> remap(n_nuisances, -1);
  std::vector<std::string> new_space;
  new_space.reserve(k);
  for (int old_index : order) {
    remap[static_cast<std::size_t>(old_index)] = static_cast<int>(new_space.size());
    new_space.push_back(d.nuisance_space()[static_cast<std::size_t>(old_index)]);
  }

  std::vector<Sample> kept;
  for (const Sample& s : d.samples()) {
    const int mapped = remap[static_cast<std::size_t>(s.nuisance)];
    if (mapped < 0) continue;
    Sample copy = s;
    copy.nuisance = mapped;
    kept.push_back(std::move(copy));
  }
  return Dataset(std::move(kept), d.label_space(), std::move(new_space));
}

Dataset balance_labels(const Dataset& d, std::uint64_t seed) {
  const std::size_t n_labels = d.num_labels();
  const std::size_t n_nuisances = d.num_nuisances();
  const auto cells = cell_indices(d);

  Rng rng(seed);
  std::vector<char> keep(d.size(), 0);
  for (std::size_t s = 0; s < n_nuisances; ++s) {
    std::int64_t m = std::numeric_limits<std::int64_t>::max();
    for (std::size_t y = 0; y < n_labels; ++y) {
      const std::int64_t c = d.count(static_cast<int>(y), static_cast<int>(s));
      if (c == 0) {
        throw DataError("nuisance '" + d.nuisance_space()[s] + "' has no '" +
                        d.label_space()[y] + "' samples");
      }
      m = std::min(m, c);
    }
    for (std::size_t y = 0; y < n_labels; ++y) {
      const auto& cell = cells[y][s];
      for (std::size_t pos : rng.sample_indices(cell.size(), static_cast<std::size_t>(m))) {
        keep[cell[pos]] = 1;
      }
    }
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (keep[i]) kept.push_back(i);
  }
  return take_samples(d, kept);
}

ContingencyTable contingency(const Dataset& d) {
  ContingencyTable t;
  t.rows = d.num_labels();
  t.cols = d.num_nuisances();
  t.counts.assign(t.rows * t.cols, 0);
  for (std::size_t y = 0; y < t.rows; ++y) {
    for (std::size_t s = 0; s < t.cols; ++s) {
      t.at(y, s) = d.count(static_cast<int>(y), static_cast<int>(s));
    }
  }
  return t;
}

Dataset take_samples(const Dataset& d, const std::vector<std::size_t>& indices) {
  std::vector<char> seen(d.size(), 0);
  std::vector<Sample> samples;
  samples.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= d.size()) throw DataError("sample index " + std::to_string(i) + " out of range");
    if (seen[i]) throw DataError("sample index " + std::to_string(i) + " repeated");
    seen[i] = 1;
    samples.push_back(d.samples()[i]);
  }
  return Dataset(std::move(samples), d.label_space(), d.nuisance_space());
}

std::vector<std::vector<std::vector<std::size_t>>> cell_indices(const Dataset& d) {
  std::vector<std::vector<std::vector<std::size_t>>> cells(
      d.num_labels(), std::vector<std::vector<std::size_t>>(d.num_nuisances()));
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Sample& s = d.samples()[i];
    cells[static_cast<std::size_t>(s.label)][static_cast<std::size_t>(s.nuisance)].push_back(i);
  }
  return cells;
}

}  // namespace textbias
