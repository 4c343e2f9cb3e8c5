#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <textbias/corpus.hpp>

namespace testutil {

// Builds a dataset from (label, nuisance-name, text) rows. The nuisance space
// is first-seen order; the label space is "0".."max".
inline textbias::Dataset make_dataset(
    const std::vector<std::tuple<int, std::string, std::string>>& rows) {
  std::vector<std::string> nuis_space;
  std::vector<textbias::Sample> samples;
  int max_label = 0;
  for (const auto& [y, s_name, text] : rows) {
    int s = -1;
    for (std::size_t i = 0; i < nuis_space.size(); ++i) {
      if (nuis_space[i] == s_name) {
        s = static_cast<int>(i);
        break;
      }
    }
    if (s < 0) {
      s = static_cast<int>(nuis_space.size());
      nuis_space.push_back(s_name);
    }
    samples.push_back({text, y, s});
    if (y > max_label) max_label = y;
  }
  std::vector<std::string> label_space;
  for (int y = 0; y <= max_label; ++y) label_space.push_back(std::to_string(y));
  return textbias::Dataset(std::move(samples), std::move(label_space),
                           std::move(nuis_space));
}

class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    for (int attempt = 0; attempt < 100; ++attempt) {
      std::ostringstream name;
      name << "textbias_test_" << std::hex << rd() << rd();
      auto candidate = base / name.str();
      if (std::filesystem::create_directory(candidate)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("could not create temp directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p);
  out << body;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testutil
