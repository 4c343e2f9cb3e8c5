#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace textbias {

// One labelled text with its nuisance factor (the content source: a business,
// a product, a venue). Both label and nuisance are indices into the owning
// dataset's spaces.
struct Sample {
  std::string text;
  int label = 0;
  int nuisance = 0;
};

// An immutable collection of samples plus the label and nuisance spaces they
// index into. Per-cell counts are precomputed so count(y, s) is O(1).
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Sample> samples, std::vector<std::string> label_space,
          std::vector<std::string> nuisance_space);

  const std::vector<Sample>& samples() const { return samples_; }
  const std::vector<std::string>& label_space() const { return label_space_; }
  const std::vector<std::string>& nuisance_space() const { return nuisance_space_; }

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::size_t num_labels() const { return label_space_.size(); }
  std::size_t num_nuisances() const { return nuisance_space_.size(); }

  std::int64_t count(int label, int nuisance) const {
    return counts_[static_cast<std::size_t>(label) * nuisance_space_.size() +
                   static_cast<std::size_t>(nuisance)];
  }

 private:
  std::vector<Sample> samples_;
  std::vector<std::string> label_space_;
  std::vector<std::string> nuisance_space_;
  std::vector<std::int64_t> counts_;  // label-major, |Y| x |S|
};

// Joint counts of two categorical variables; rows are labels, columns are
// nuisance values when built from a dataset.
struct ContingencyTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int64_t> counts;  // row-major

  std::int64_t at(std::size_t r, std::size_t c) const { return counts[r * cols + c]; }
  std::int64_t& at(std::size_t r, std::size_t c) { return counts[r * cols + c]; }
  std::int64_t total() const;
  std::int64_t row_total(std::size_t r) const;
  std::int64_t col_total(std::size_t c) const;
};

// Field names for raw review ingestion. Empty strings mean "auto": the rating
// field tries "stars" then "overall", the nuisance field tries "business_id"
// then "asin", and the text field defaults to "text".
struct ReviewFields {
  std::string rating;
  std::string nuisance;
  std::string text;
};

// Reads a JSON-Lines review corpus and maps star ratings to sentiment:
// {1,2,3} -> negative, {4,5} -> positive. Ratings must be integral values in
// 1..5 (4.0 is accepted, 4.5 is an error). Nuisance values are indexed in
// first-seen order.
Dataset ingest_reviews(const std::string& path, const ReviewFields& fields = {});

// Reads the canonical interchange format, one record per line:
//   {"label": 0, "nuisance": "<id>", "text": "..."}
Dataset read_labeled_jsonl(const std::string& path);

// Writes the canonical interchange format. read_labeled_jsonl(write_jsonl(d))
// reproduces d's samples exactly.
void write_jsonl(const Dataset& d, const std::string& path);

// Keeps only the k most frequent nuisance values (ties broken by first-seen
// order) and reindexes the nuisance space to size k, preserving the original
// relative order of the survivors.
Dataset select_top_nuisances(const Dataset& d, std::size_t k);

// Downsamples every (label, nuisance) cell to the per-nuisance minimum so each
// nuisance value carries every label equally often. Removal within a cell is
// uniform at random under the seed; surviving samples keep their input order.
// Errors if some nuisance value lacks a label entirely.
Dataset balance_labels(const Dataset& d, std::uint64_t seed);

// Label-by-nuisance joint counts.
ContingencyTable contingency(const Dataset& d);

// New dataset holding the given samples (indices must be valid and unique);
// label and nuisance spaces are carried over unchanged.
Dataset take_samples(const Dataset& d, const std::vector<std::size_t>& indices);

// Sample indices grouped per (label, nuisance) cell, in input order.
std::vector<std::vector<std::vector<std::size_t>>> cell_indices(const Dataset& d);

}  // namespace textbias
