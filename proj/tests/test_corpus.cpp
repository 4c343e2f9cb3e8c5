#include <doctest.h>

#include <set>
#include <string>

#include <textbias/corpus.hpp>
#include <textbias/errors.hpp>
#include <textbias/rng.hpp>

#include "test_util.hpp"

using namespace textbias;
using testutil::TempDir;
using testutil::make_dataset;
using testutil::write_file;

TEST_SUITE_BEGIN("corpus");

TEST_CASE("review ingestion maps star ratings to sentiment") {
  TempDir dir;
  write_file(dir.file("r.jsonl"),
             R"({"stars": 1, "business_id": "a", "text": "awful"}
{"stars": 2, "business_id": "a", "text": "bad"}
{"stars": 3, "business_id": "b", "text": "meh"}
{"stars": 4, "business_id": "b", "text": "nice"}
{"stars": 5, "business_id": "c", "text": "great"}
)");
  Dataset d = ingest_reviews(dir.file("r.jsonl").string());
  REQUIRE(d.size() == 5);
  CHECK(d.label_space() == std::vector<std::string>{"negative", "positive"});
  // 1,2,3 are negative; 4,5 positive.
  CHECK(d.samples()[0].label == 0);
  CHECK(d.samples()[1].label == 0);
  CHECK(d.samples()[2].label == 0);
  CHECK(d.samples()[3].label == 1);
  CHECK(d.samples()[4].label == 1);
  // Nuisance values are indexed in first-seen order.
  CHECK(d.nuisance_space() == std::vector<std::string>{"a", "b", "c"});
  CHECK(d.samples()[2].nuisance == 1);
}

TEST_CASE("review ingestion accepts integral floats and amazon-style fields") {
  TempDir dir;
  write_file(dir.file("r.jsonl"),
             R"({"overall": 4.0, "asin": "p1", "text": "fine"}
{"overall": 2.0, "asin": "p2", "text": "poor"}
)");
  Dataset d = ingest_reviews(dir.file("r.jsonl").string());
  REQUIRE(d.size() == 2);
  CHECK(d.samples()[0].label == 1);
  CHECK(d.samples()[1].label == 0);
}

TEST_CASE("review ingestion rejects fractional ratings with the line number") {
  TempDir dir;
  write_file(dir.file("r.jsonl"),
             R"({"stars": 5, "business_id": "a", "text": "ok"}
{"stars": 4.5, "business_id": "a", "text": "half"}
)");
  CHECK_THROWS_WITH_AS(ingest_reviews(dir.file("r.jsonl").string()),
                       doctest::Contains("line 2"), ParseError);
}

TEST_CASE("review ingestion rejects out-of-range ratings") {
  TempDir dir;
  write_file(dir.file("r.jsonl"), R"({"stars": 6, "business_id": "a", "text": "?"})"
                                  "\n");
  CHECK_THROWS_AS(ingest_reviews(dir.file("r.jsonl").string()), ParseError);
}

TEST_CASE("malformed JSON reports its line number") {
  TempDir dir;
  write_file(dir.file("r.jsonl"),
             "{\"stars\": 5, \"business_id\": \"a\", \"text\": \"ok\"}\n"
             "\n"
             "not json at all\n");
  // The blank line is skipped but still counts toward line numbering.
  CHECK_THROWS_WITH_AS(ingest_reviews(dir.file("r.jsonl").string()),
                       doctest::Contains("line 3"), ParseError);
}

TEST_CASE("empty review file yields an empty dataset") {
  TempDir dir;
  write_file(dir.file("r.jsonl"), "");
  Dataset d = ingest_reviews(dir.file("r.jsonl").string());
  CHECK(d.empty());
  CHECK(d.num_labels() == 0);
}

TEST_CASE("missing file is a configuration error") {
  CHECK_THROWS_AS(ingest_reviews("/nonexistent/path.jsonl"), ConfigError);
}

TEST_CASE("labeled jsonl round trip preserves samples exactly") {
  Dataset d = make_dataset({
      {0, "src_b", "one two"},
      {1, "src_a", "three"},
      {0, "src_a", "four five six"},
      {2, "src_b", "seven"},
  });
  TempDir dir;
  write_jsonl(d, dir.file("d.jsonl").string());
  Dataset back = read_labeled_jsonl(dir.file("d.jsonl").string());
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back.samples()[i].text == d.samples()[i].text);
    CHECK(back.samples()[i].label == d.samples()[i].label);
    const std::string& want =
        d.nuisance_space()[static_cast<std::size_t>(d.samples()[i].nuisance)];
    const std::string& got =
        back.nuisance_space()[static_cast<std::size_t>(back.samples()[i].nuisance)];
    CHECK(got == want);
  }
  CHECK(back.label_space() == std::vector<std::string>{"0", "1", "2"});
}

TEST_CASE("labeled jsonl rejects negative labels") {
  TempDir dir;
  write_file(dir.file("d.jsonl"), R"({"label": -1, "nuisance": "a", "text": "x"})"
                                  "\n");
  CHECK_THROWS_AS(read_labeled_jsonl(dir.file("d.jsonl").string()), ParseError);
}

TEST_CASE("labeled jsonl rejects whitespace-only text") {
  TempDir dir;
  write_file(dir.file("d.jsonl"), R"({"label": 0, "nuisance": "a", "text": "  \t"})"
                                  "\n");
  CHECK_THROWS_WITH_AS(read_labeled_jsonl(dir.file("d.jsonl").string()),
                       doctest::Contains("line 1"), ParseError);
}

TEST_CASE("dataset constructor validates index ranges") {
  std::vector<Sample> s{{"x", 0, 2}};
  CHECK_THROWS_AS(Dataset(s, {"0"}, {"a", "b"}), DataError);
  std::vector<Sample> s2{{"x", 1, 0}};
  CHECK_THROWS_AS(Dataset(s2, {"0"}, {"a"}), DataError);
}

TEST_CASE("top-k selection keeps the most frequent nuisance values") {
  // a: 5 samples, b: 3, c: 2.
  std::vector<std::tuple<int, std::string, std::string>> rows;
  for (int i = 0; i < 5; ++i) rows.push_back({i % 2, "a", "ta" + std::to_string(i)});
  for (int i = 0; i < 3; ++i) rows.push_back({i % 2, "b", "tb" + std::to_string(i)});
  for (int i = 0; i < 2; ++i) rows.push_back({i % 2, "c", "tc" + std::to_string(i)});
  Dataset d = make_dataset(rows);

  Dataset top = select_top_nuisances(d, 2);
  CHECK(top.nuisance_space() == std::vector<std::string>{"a", "b"});
  CHECK(top.size() == 8);
  // Survivors keep their original relative order.
  CHECK(top.samples()[0].text == "ta0");
  CHECK(top.samples()[5].text == "tb0");
}

TEST_CASE("top-k ties go to the first-seen nuisance value") {
  Dataset d = make_dataset({
      {0, "x", "t1"},
      {0, "y", "t2"},
      {0, "x", "t3"},
      {0, "y", "t4"},
  });
  Dataset top = select_top_nuisances(d, 1);
  CHECK(top.nuisance_space() == std::vector<std::string>{"x"});
  CHECK(top.size() == 2);
}

TEST_CASE("top-k edge cases") {
  Dataset d = make_dataset({{0, "a", "t"}, {0, "b", "u"}});
  CHECK_THROWS_AS(select_top_nuisances(d, 0), ConfigError);
  Dataset same = select_top_nuisances(d, 2);
  CHECK(same.size() == 2);
  CHECK(same.nuisance_space() == d.nuisance_space());
  Dataset more = select_top_nuisances(d, 10);
  CHECK(more.size() == 2);
}

TEST_CASE("label balancing downsamples each nuisance to its minimum label count") {
  // Source a: 10 label-0 vs 6 label-1; source b: 5 and 5; source c: 4 vs 7.
  std::vector<std::tuple<int, std::string, std::string>> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({0, "a", "a0_" + std::to_string(i)});
  for (int i = 0; i < 6; ++i) rows.push_back({1, "a", "a1_" + std::to_string(i)});
  for (int i = 0; i < 5; ++i) rows.push_back({0, "b", "b0_" + std::to_string(i)});
  for (int i = 0; i < 5; ++i) rows.push_back({1, "b", "b1_" + std::to_string(i)});
  for (int i = 0; i < 4; ++i) rows.push_back({0, "c", "c0_" + std::to_string(i)});
  for (int i = 0; i < 7; ++i) rows.push_back({1, "c", "c1_" + std::to_string(i)});
  Dataset d = make_dataset(rows);

  Dataset b = balance_labels(d, 7);
  CHECK(b.count(0, 0) == 6);
  CHECK(b.count(1, 0) == 6);
  CHECK(b.count(0, 1) == 5);
  CHECK(b.count(1, 1) == 5);
  CHECK(b.count(0, 2) == 4);
  CHECK(b.count(1, 2) == 4);
  CHECK(b.size() == 30);

  // Survivors keep input order.
  std::vector<std::size_t> positions;
  for (const Sample& s : b.samples()) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.samples()[i].text == s.text) positions.push_back(i);
    }
  }
  CHECK(std::is_sorted(positions.begin(), positions.end()));
}

TEST_CASE("label balancing needs every label in every nuisance cell") {
  Dataset d = make_dataset({{0, "a", "t"}, {1, "a", "u"}, {0, "b", "v"}});
  CHECK_THROWS_WITH_AS(balance_labels(d, 0), doctest::Contains("'b'"), DataError);
}

TEST_CASE("label balancing removal differs by seed but counts do not") {
  std::vector<std::tuple<int, std::string, std::string>> rows;
  for (int i = 0; i < 40; ++i) rows.push_back({0, "a", "x" + std::to_string(i)});
  for (int i = 0; i < 10; ++i) rows.push_back({1, "a", "y" + std::to_string(i)});
  Dataset d = make_dataset(rows);
  Dataset b1 = balance_labels(d, 1);
  Dataset b2 = balance_labels(d, 2);
  CHECK(b1.size() == 20);
  CHECK(b2.size() == 20);
  std::set<std::string> t1, t2;
  for (const Sample& s : b1.samples()) t1.insert(s.text);
  for (const Sample& s : b2.samples()) t2.insert(s.text);
  CHECK(t1 != t2);
  // Same seed reproduces the same selection.
  Dataset b3 = balance_labels(d, 1);
  std::set<std::string> t3;
  for (const Sample& s : b3.samples()) t3.insert(s.text);
  CHECK(t1 == t3);
}

TEST_CASE("contingency table matches per-cell counts") {
  Dataset d = make_dataset({
      {0, "a", "1"}, {0, "a", "2"}, {1, "a", "3"},
      {0, "b", "4"}, {1, "b", "5"}, {1, "b", "6"}, {1, "b", "7"},
  });
  ContingencyTable t = contingency(d);
  REQUIRE(t.rows == 2);
  REQUIRE(t.cols == 2);
  CHECK(t.at(0, 0) == 2);
  CHECK(t.at(1, 0) == 1);
  CHECK(t.at(0, 1) == 1);
  CHECK(t.at(1, 1) == 3);
  CHECK(t.total() == 7);
  CHECK(t.row_total(1) == 4);
  CHECK(t.col_total(0) == 3);
}

TEST_CASE("take_samples validates indices") {
  Dataset d = make_dataset({{0, "a", "1"}, {0, "a", "2"}});
  CHECK_THROWS_AS(take_samples(d, {0, 0}), DataError);
  CHECK_THROWS_AS(take_samples(d, {2}), DataError);
  Dataset sub = take_samples(d, {1});
  CHECK(sub.size() == 1);
  CHECK(sub.samples()[0].text == "2");
  CHECK(sub.nuisance_space() == d.nuisance_space());
}

TEST_CASE("cell_indices groups samples in input order") {
  Dataset d = make_dataset({{0, "a", "1"}, {1, "a", "2"}, {0, "a", "3"}, {0, "b", "4"}});
  auto cells = cell_indices(d);
  CHECK(cells[0][0] == std::vector<std::size_t>{0, 2});
  CHECK(cells[1][0] == std::vector<std::size_t>{1});
  CHECK(cells[0][1] == std::vector<std::size_t>{3});
  CHECK(cells[1][1].empty());
}

TEST_SUITE_END();
