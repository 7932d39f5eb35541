#include <doctest.h>

#include "fafscreen/dataset_io.hpp"
#include "fafscreen/rng.hpp"
#include "fafscreen/text_format.hpp"

using namespace faf;

namespace {

Dataset random_table(CounterRng& rng, std::size_t n) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSample s;
    s.id = "img," + std::to_string(i);  // needs quoting
    const auto pick = rng.below(4);
    s.disease = static_cast<Disease>(pick);
    s.label = s.disease == Disease::NONE ? Label::Healthy : Label::Diseased;
    for (std::size_t k = 0; k < kFeatureCount; ++k)
      s.features.push_back(std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.below(40)) - 20));
    d.samples.push_back(s);
  }
  return d;
}

}  // namespace

TEST_SUITE("dataset_io") {
  TEST_CASE("number formatting round trips") {
    CounterRng rng(1);
    for (int i = 0; i < 1000; ++i) {
      const double v = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.below(200)) - 100);
      REQUIRE(*parse_double(format_double(v)) == v);
    }
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK_FALSE(parse_double("1.0x").has_value());
    CHECK_FALSE(parse_double("").has_value());
    CHECK(parse_double("+2") == 2.0);
  }

  TEST_CASE("csv splitting") {
    CHECK(split_csv_line("a,\"b,c\",d") == std::vector<std::string>{"a", "b,c", "d"});
    CHECK(split_csv_line("\"x\"\"y\"") == std::vector<std::string>{"x\"y"});
  }

  TEST_CASE("feature table round trip is lossless") {
    CounterRng rng(2);
    for (int t = 0; t < 100; ++t) {
      const auto d = random_table(rng, 1 + rng.below(8));
      const auto text = write_features(d);
      const auto back = read_features(text);
      REQUIRE(back.size() == d.size());
      for (std::size_t i = 0; i < d.size(); ++i) {
        REQUIRE(back.samples[i].id == d.samples[i].id);
        REQUIRE(back.samples[i].label == d.samples[i].label);
        REQUIRE(back.samples[i].disease == d.samples[i].disease);
        REQUIRE(back.samples[i].features == d.samples[i].features);
      }
      REQUIRE(write_features(back) == text);
    }
  }

  TEST_CASE("feature table errors") {
    CounterRng rng(3);
    const auto text = write_features(random_table(rng, 2));
    CHECK_THROWS_AS(read_features(""), DataError);
    CHECK_THROWS_AS(read_features("id,label\n"), DataError);
    const auto header = feature_table_header();
    std::string row = "x,1,STGD";
    for (int k = 0; k < 18; ++k) row += ",1";
    CHECK_NOTHROW(read_features(header + "\n" + row + "\n"));
    CHECK_THROWS_AS(read_features(header + "\n" + row + "\n" + row + "\n"), DataError);  // duplicate id
    std::string bad_label = row;
    bad_label.replace(2, 1, "2");
    CHECK_THROWS_AS(read_features(header + "\n" + bad_label + "\n"), DataError);
    std::string mismatch = "x,-1,STGD" + row.substr(8);
    CHECK_THROWS_AS(read_features(header + "\n" + mismatch + "\n"), DataError);
    CHECK_THROWS_AS(read_features(header + "\n" + row + ",1\n"), DataError);
    std::string nonnum = row.substr(0, row.size() - 1) + "abc";
    CHECK_THROWS_AS(read_features(header + "\n" + nonnum + "\n"), DataError);
    std::string nan_row = row.substr(0, row.size() - 1) + "nan";
    CHECK_THROWS_AS(read_features(header + "\n" + nan_row + "\n"), DataError);
    CHECK_THROWS_AS(read_features(header + "\nx,1,FOO" + row.substr(8) + "\n"), DataError);
    Dataset dup = random_table(rng, 1);
    dup.samples.push_back(dup.samples[0]);
    CHECK_THROWS_AS(write_features(dup), DataError);
  }

  TEST_CASE("manifest round trip") {
    std::vector<ManifestEntry> entries = {
        {"a.pgm", Label::Healthy, Disease::NONE, {10.5, 11.25, 2, 4, 9, Laterality::OD, false}},
        {"b c.png", Label::Diseased, Disease::CNVM, {0.1, 3, 1, 2, 3, Laterality::OS, false}}};
    const auto text = write_manifest(entries);
    CHECK(text.rfind(manifest_header(), 0) == 0);
    const auto back = read_manifest(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].grid.center_y == 11.25);
    CHECK(back[1].grid.laterality == Laterality::OS);
    CHECK(back[1].filename == "b c.png");
    CHECK_THROWS_AS(read_manifest("filename,label\n"), DataError);
    CHECK_THROWS_AS(read_manifest(manifest_header() + "\nx,1,STGD,1,1,1,2,3,LEFT\n"), DataError);
  }

  TEST_CASE("input rows") {
    const auto rows = read_input_rows("id,a,b\nv1,1,2\nv2,3,4\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].values == std::vector<double>{3, 4});
    const auto labelled = read_input_rows("id,label,disease,x\nq,1,STGD,0.5\n");
    CHECK(labelled[0].values == std::vector<double>{0.5});
    CHECK_THROWS_AS(read_input_rows("name,a\nx,1\n"), DataError);
    CHECK_THROWS_AS(read_input_rows("id,a\nx,1,2\n"), DataError);
  }
}
