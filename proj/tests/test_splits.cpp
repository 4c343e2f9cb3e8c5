#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <textbias/errors.hpp>
#include <textbias/splits.hpp>

#include "test_util.hpp"

using namespace textbias;
using testutil::TempDir;
using testutil::make_dataset;

namespace {

// n_sources x n_labels x per_cell samples with unique texts, in cell blocks.
Dataset grid_dataset(int n_sources, int n_labels, int per_cell) {
  std::vector<std::tuple<int, std::string, std::string>> rows;
  int n = 0;
  for (int s = 0; s < n_sources; ++s) {
    for (int y = 0; y < n_labels; ++y) {
      for (int i = 0; i < per_cell; ++i) {
        rows.push_back({y, "src" + std::to_string(s), "t" + std::to_string(n++)});
      }
    }
  }
  return make_dataset(rows);
}

std::set<std::string> texts_of(const Dataset& d) {
  std::set<std::string> out;
  for (const Sample& s : d.samples()) out.insert(s.text);
  return out;
}

bool disjoint(const std::set<std::string>& a, const std::set<std::string>& b) {
  for (const auto& x : a) {
    if (b.count(x)) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE_BEGIN("splits");

TEST_CASE("iid split takes floor(fraction * cell) from every cell") {
  Dataset d = grid_dataset(2, 2, 10);
  auto [train, test] = iid_split(d, 0.2, 3);
  CHECK(train.size() == 32);
  CHECK(test.size() == 8);
  for (int y = 0; y < 2; ++y) {
    for (int s = 0; s < 2; ++s) {
      CHECK(train.count(y, s) == 8);
      CHECK(test.count(y, s) == 2);
    }
  }
  CHECK(disjoint(texts_of(train), texts_of(test)));

  // Both sides preserve input order (texts were created in index order).
  auto ordered = [](const Dataset& part) {
    std::vector<int> ids;
    for (const Sample& s : part.samples()) ids.push_back(std::stoi(s.text.substr(1)));
    return std::is_sorted(ids.begin(), ids.end());
  };
  CHECK(ordered(train));
  CHECK(ordered(test));

  // Odd cell sizes floor: floor(0.25 * 7) = 1.
  Dataset odd = grid_dataset(1, 2, 7);
  auto [tr2, te2] = iid_split(odd, 0.25, 1);
  CHECK(te2.count(0, 0) == 1);
  CHECK(te2.count(1, 0) == 1);

  CHECK_THROWS_AS(iid_split(d, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(iid_split(d, 1.0, 1), ConfigError);
  Dataset thin = make_dataset({{0, "a", "x"}, {1, "a", "y"}});
  CHECK_THROWS_AS(iid_split(thin, 0.5, 1), DataError);
}

TEST_CASE("training-bias split hits the exact per-cell arithmetic") {
  // 4 sources x 2 labels x 100 per cell, test_fraction 0.2, beta 0.7:
  // per cell 80 train-pool / 10 shifted / 10 same; every group minimum is 80,
  // so favored cells get int(0.7 * 80) = 56 and the rest int(0.3 * 80) = 24.
  Dataset d = grid_dataset(4, 2, 100);
  SplitResult sr = gtb_split(d, 0.7, 42, 0.2);
  const GtbPlan& plan = std::get<GtbPlan>(sr.plan);

  CHECK(plan.beta == 0.7);
  CHECK(plan.dropped_sources.empty());
  REQUIRE(plan.groups.size() == 2);

  for (int s = 0; s < 4; ++s) {
    const int fav = plan.favored[static_cast<std::size_t>(s)];
    REQUIRE(fav >= 0);
    CHECK(sr.train.count(fav, s) == 56);
    CHECK(sr.train.count(1 - fav, s) == 24);
    CHECK(sr.test_same.count(fav, s) == 7);    // int(0.7 * 10)
    CHECK(sr.test_same.count(1 - fav, s) == 3);  // int(0.3 * 10)
    // Each 20-sample test cell was halved, so the shifted side keeps an
    // exactly balanced 10 per (label, source).
    CHECK(sr.test_shifted.count(0, s) == 10);
    CHECK(sr.test_shifted.count(1, s) == 10);
  }
  CHECK(sr.train.size() == 4 * 80);
  CHECK(sr.test_same.size() == 4 * 10);
  CHECK(sr.test_shifted.size() == 4 * 2 * 10);

  // The global train label marginal stays exactly uniform.
  std::int64_t y0 = 0, y1 = 0;
  for (int s = 0; s < 4; ++s) {
    y0 += sr.train.count(0, s);
    y1 += sr.train.count(1, s);
  }
  CHECK(y0 == y1);

  // Pairwise disjoint parts.
  auto train_t = texts_of(sr.train), shifted_t = texts_of(sr.test_shifted),
       same_t = texts_of(sr.test_same);
  CHECK(disjoint(train_t, shifted_t));
  CHECK(disjoint(train_t, same_t));
  CHECK(disjoint(shifted_t, same_t));
}

TEST_CASE("favored labels form a bijection within every group") {
  Dataset d = grid_dataset(9, 3, 30);
  SplitResult sr = gtb_split(d, 0.6, 11, 0.3);
  const GtbPlan& plan = std::get<GtbPlan>(sr.plan);
  REQUIRE(plan.groups.size() == 3);
  std::set<int> seen_sources;
  for (const auto& group : plan.groups) {
    REQUIRE(group.size() == 3);
    std::set<int> labels;
    for (int s : group) {
      CHECK(seen_sources.insert(s).second);
      labels.insert(plan.favored[static_cast<std::size_t>(s)]);
    }
    CHECK(labels == std::set<int>{0, 1, 2});
  }
}

TEST_CASE("sources that fit no full group are dropped everywhere") {
  Dataset d = grid_dataset(5, 2, 40);
  SplitResult sr = gtb_split(d, 0.8, 7, 0.25);
  const GtbPlan& plan = std::get<GtbPlan>(sr.plan);
  REQUIRE(plan.dropped_sources.size() == 1);
  const int dropped = plan.dropped_sources[0];
  CHECK(plan.favored[static_cast<std::size_t>(dropped)] == -1);
  for (const Dataset* part : {&sr.train, &sr.test_shifted, &sr.test_same}) {
    for (const Sample& s : part->samples()) CHECK(s.nuisance != dropped);
  }
}

TEST_CASE("beta 0.5 yields a balanced train set and beta 1.0 a pure one") {
  Dataset d = grid_dataset(4, 2, 60);
  SplitResult even = gtb_split(d, 0.5, 5, 0.25);
  for (int s = 0; s < 4; ++s) {
    CHECK(even.train.count(0, s) == even.train.count(1, s));
  }
  SplitResult pure = gtb_split(d, 1.0, 5, 0.25);
  const GtbPlan& plan = std::get<GtbPlan>(pure.plan);
  for (int s = 0; s < 4; ++s) {
    const int fav = plan.favored[static_cast<std::size_t>(s)];
    CHECK(pure.train.count(1 - fav, s) == 0);
    CHECK(pure.train.count(fav, s) == 45);  // int(1.0 * 45)
  }
}

TEST_CASE("training-bias split is deterministic in the seed") {
  Dataset d = grid_dataset(4, 2, 50);
  SplitResult a = gtb_split(d, 0.7, 9, 0.2);
  SplitResult b = gtb_split(d, 0.7, 9, 0.2);
  CHECK(texts_of(a.train) == texts_of(b.train));
  CHECK(std::get<GtbPlan>(a.plan).favored == std::get<GtbPlan>(b.plan).favored);
  SplitResult c = gtb_split(d, 0.7, 10, 0.2);
  CHECK(texts_of(a.train) != texts_of(c.train));
}

TEST_CASE("training-bias split validates its inputs") {
  Dataset d = grid_dataset(4, 2, 20);
  CHECK_THROWS_AS(gtb_split(d, 0.4, 1, 0.2), ConfigError);
  CHECK_THROWS_AS(gtb_split(d, 1.1, 1, 0.2), ConfigError);
  Dataset one_label = grid_dataset(4, 1, 20);
  CHECK_THROWS_AS(gtb_split(one_label, 0.7, 1, 0.2), DataError);
  Dataset narrow = grid_dataset(1, 2, 20);
  CHECK_THROWS_AS(gtb_split(narrow, 0.7, 1, 0.2), DataError);
  Dataset unbalanced = make_dataset({{0, "a", "1"}, {0, "a", "2"}, {1, "a", "3"},
                                     {0, "b", "4"}, {1, "b", "5"}, {1, "b", "6"}});
  CHECK_THROWS_AS(gtb_split(unbalanced, 0.7, 1, 0.5), DataError);
}

TEST_CASE("group-unseen split holds out whole sources") {
  Dataset d = grid_dataset(6, 2, 10);
  SplitResult sr = gu_split(d, 3, 13, 0.2);
  const GuPlan& plan = std::get<GuPlan>(sr.plan);
  REQUIRE(plan.unknown_sources.size() == 3);
  REQUIRE(plan.known_sources.size() == 3);
  CHECK(std::is_sorted(plan.unknown_sources.begin(), plan.unknown_sources.end()));
  CHECK(std::is_sorted(plan.known_sources.begin(), plan.known_sources.end()));
  std::set<int> all(plan.known_sources.begin(), plan.known_sources.end());
  for (int s : plan.unknown_sources) CHECK(all.insert(s).second);
  CHECK(all.size() == 6);

  // test_shifted is every sample of the unknown sources.
  CHECK(sr.test_shifted.size() == 3 * 2 * 10);
  std::set<int> unknown(plan.unknown_sources.begin(), plan.unknown_sources.end());
  for (const Sample& s : sr.test_shifted.samples()) CHECK(unknown.count(s.nuisance) == 1);
  for (const Sample& s : sr.train.samples()) CHECK(unknown.count(s.nuisance) == 0);
  for (const Sample& s : sr.test_same.samples()) CHECK(unknown.count(s.nuisance) == 0);

  // Known cells split 8 / 2 under holdout_fraction 0.2.
  for (int s : plan.known_sources) {
    for (int y = 0; y < 2; ++y) {
      CHECK(sr.train.count(y, s) == 8);
      CHECK(sr.test_same.count(y, s) == 2);
    }
  }
  CHECK(sr.train.size() + sr.test_same.size() + sr.test_shifted.size() == d.size());

  auto train_t = texts_of(sr.train), same_t = texts_of(sr.test_same),
       shifted_t = texts_of(sr.test_shifted);
  CHECK(disjoint(train_t, same_t));
  CHECK(disjoint(train_t, shifted_t));
  CHECK(disjoint(same_t, shifted_t));

  CHECK_THROWS_AS(gu_split(d, 0, 1, 0.2), ConfigError);
  CHECK_THROWS_AS(gu_split(d, 6, 1, 0.2), ConfigError);
  CHECK_THROWS_AS(gu_split(d, 3, 1, 0.0), ConfigError);
}

TEST_CASE("group-unseen split is deterministic in the seed") {
  Dataset d = grid_dataset(8, 2, 6);
  SplitResult a = gu_split(d, 4, 21, 0.25);
  SplitResult b = gu_split(d, 4, 21, 0.25);
  CHECK(std::get<GuPlan>(a.plan).unknown_sources == std::get<GuPlan>(b.plan).unknown_sources);
  CHECK(texts_of(a.train) == texts_of(b.train));
}

TEST_CASE("split directories round trip through disk") {
  Dataset d = grid_dataset(4, 2, 40);
  SplitResult orig = gtb_split(d, 0.7, 33, 0.25);
  TempDir dir;
  write_split_dir(orig, dir.file("gtb").string());
  SplitResult back = load_split_dir(dir.file("gtb").string());
  REQUIRE(std::holds_alternative<GtbPlan>(back.plan));

  auto names_of = [](const Dataset& part) {
    std::vector<std::pair<std::string, int>> out;
    for (const Sample& s : part.samples()) {
      out.push_back({part.nuisance_space()[static_cast<std::size_t>(s.nuisance)], s.label});
    }
    return out;
  };
  CHECK(names_of(back.train) == names_of(orig.train));
  CHECK(names_of(back.test_shifted) == names_of(orig.test_shifted));
  CHECK(names_of(back.test_same) == names_of(orig.test_same));

  // The plan survives as a name -> label map even though indices may shift.
  const GtbPlan& po = std::get<GtbPlan>(orig.plan);
  const GtbPlan& pb = std::get<GtbPlan>(back.plan);
  CHECK(pb.beta == po.beta);
  CHECK(pb.seed == po.seed);
  CHECK(pb.test_fraction == po.test_fraction);
  auto favored_by_name = [](const GtbPlan& p, const Dataset& train) {
    std::map<std::string, int> out;
    for (std::size_t s = 0; s < p.favored.size(); ++s) {
      if (p.favored[s] >= 0) out[train.nuisance_space()[s]] = p.favored[s];
    }
    return out;
  };
  CHECK(favored_by_name(pb, back.train) == favored_by_name(po, orig.train));

  SplitResult gu_orig = gu_split(d, 2, 15, 0.2);
  write_split_dir(gu_orig, dir.file("gu").string());
  SplitResult gu_back = load_split_dir(dir.file("gu").string());
  REQUIRE(std::holds_alternative<GuPlan>(gu_back.plan));
  CHECK(names_of(gu_back.train) == names_of(gu_orig.train));
  CHECK(names_of(gu_back.test_shifted) == names_of(gu_orig.test_shifted));
  const GuPlan& go = std::get<GuPlan>(gu_orig.plan);
  const GuPlan& gb = std::get<GuPlan>(gu_back.plan);
  CHECK(gb.k_unknown == go.k_unknown);
  auto source_names = [](const std::vector<int>& idx, const Dataset& train) {
    std::set<std::string> out;
    for (int s : idx) out.insert(train.nuisance_space()[static_cast<std::size_t>(s)]);
    return out;
  };
  CHECK(source_names(gb.unknown_sources, gu_back.train) ==
        source_names(go.unknown_sources, gu_orig.train));
}

TEST_SUITE_END();
