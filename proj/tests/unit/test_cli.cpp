#include <doctest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "fafscreen/cli.hpp"
#include "fafscreen/dataset_io.hpp"
#include "fafscreen/image.hpp"
#include "fafscreen/rng.hpp"
#include "fafscreen/svm.hpp"
#include "fafscreen/text_format.hpp"

using namespace faf;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

void write_two_point_model(const std::string& path) {
  Dataset d{{{"a", {-1, -1}, Label::Healthy, Disease::NONE}, {"b", {1, 1}, Label::Diseased, Disease::STGD}}};
  SvmConfig cfg;
  cfg.kernel = KernelSpec::linear();
  cfg.C = 10;
  cfg.standardize = false;
  write_text_file(path, save_model(train(d, cfg)));
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2 with a JSON error line") {
    auto r = invoke({});
    CHECK(r.code == cli::kExitUsage);
    auto j = nlohmann::json::parse(r.err);
    CHECK(j["error"]["exit_code"] == 2);
    r = invoke({"frobnicate"});
    CHECK(r.code == cli::kExitUsage);
    r = invoke({"features", "--image", "x.pgm"});
    CHECK(r.code == cli::kExitUsage);
    r = invoke({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("mccv") != std::string::npos);
  }

  TEST_CASE("features on a constant image") {
    TempDir dir("fafscreen_cli_features");
    const FafImage img(64, 64, std::vector<std::uint16_t>(64 * 64, 77), 255);
    write_file(dir / "c.pgm", encode_pgm(img));
    const std::vector<std::string> base{"features", "--image", dir / "c.pgm", "--cx", "32", "--cy", "32",
                                        "--r1", "5", "--r2", "12", "--r3", "25", "--laterality", "OD"};
    auto r = invoke(base);
    REQUIRE(r.code == 0);
    const auto table = read_features(r.out);
    REQUIRE(table.size() == 1);
    CHECK(table.samples[0].id == "c");
    for (std::size_t k = 0; k < kFeatureCount; ++k) CHECK(table.samples[0].features[k] == (k % 2 == 0 ? 77.0 : 0.0));

    auto with_out = base;
    with_out.insert(with_out.end(), {"--out", dir / "t.csv"});
    CHECK(invoke(with_out).code == 0);
    auto second = with_out;
    second.insert(second.end(), {"--id", "c2", "--disease", "STGD"});
    CHECK(invoke(second).code == 0);
    const auto appended = read_features_file(dir / "t.csv");
    CHECK(appended.size() == 2);
    CHECK(appended.samples[1].label == Label::Diseased);
    CHECK(invoke(with_out).code == cli::kExitData);  // duplicate id

    auto bad = base;
    bad[10] = "3";  // r2 <= r1
    r = invoke(bad);
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("r1 < r2 < r3") != std::string::npos);
    auto missing = base;
    missing[2] = dir / "none.pgm";
    CHECK(invoke(missing).code == cli::kExitData);
  }

  TEST_CASE("predict with the analytic model") {
    TempDir dir("fafscreen_cli_predict");
    write_two_point_model(dir / "m.json");
    write_text_file(dir / "x.csv", "id,x1,x2\np,1,1\nq,-1,-1\n");
    const auto r = invoke({"predict", "--model", dir / "m.json", "--features", dir / "x.csv"});
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string header, p, q;
    std::getline(lines, header);
    std::getline(lines, p);
    std::getline(lines, q);
    CHECK(header == "id,label,decision_value,signed_distance");
    const auto cp = split_csv_line(p);
    CHECK(cp[1] == "1");
    CHECK(std::fabs(*parse_double(cp[2]) - 1.0) < 1e-9);
    CHECK(std::fabs(*parse_double(cp[3]) + 1.41421356) < 1e-6);
    CHECK(split_csv_line(q)[1] == "-1");
  }

  TEST_CASE("synth, train, mccv, sweep, analyze and monitor") {
    TempDir dir("fafscreen_cli_pipeline");
    write_text_file(dir / "p.json",
                    R"({"image_size": 128, "grid_r3": 48, "fovea_offset": 4, "foveal_dip_sigma": 10,
                        "n_healthy": 16, "n_diseased": 20,
                        "lesions": {"STGD": {"radius": [5, 12]}, "CNVM": {"radius": [5, 12]},
                                    "CSCR": {"radius": [5, 12]}}})");
    auto r = invoke({"synth", "--params", dir / "p.json", "--out", dir / "img", "--features", dir / "f.csv"});
    REQUIRE(r.code == 0);
    r = invoke({"featurize-manifest", "--manifest", dir / "img/manifest.csv", "--threads", "2"});
    REQUIRE(r.code == 0);
    CHECK(r.out == read_text_file(dir / "f.csv"));

    r = invoke({"train", "--features", dir / "f.csv", "--kernel", "rbf", "--sf", "2", "--out", dir / "m.json"});
    REQUIRE(r.code == 0);
    CHECK(load_model(read_text_file(dir / "m.json")).kernel.kind == KernelKind::Rbf);

    const std::vector<std::string> mccv{"mccv", "--features", dir / "f.csv", "--iterations", "2", "--seed", "5",
                                       "--ratios", "0.5,80:20"};
    auto a = mccv, b = mccv;
    a.insert(a.end(), {"--out-csv", dir / "a.csv", "--out-json", dir / "a.json"});
    b.insert(b.end(), {"--out-csv", dir / "b.csv", "--out-json", dir / "b.json", "--threads", "3"});
    REQUIRE(invoke(a).code == 0);
    REQUIRE(invoke(b).code == 0);
    CHECK(read_text_file(dir / "a.csv") == read_text_file(dir / "b.csv"));
    CHECK(read_text_file(dir / "a.json") == read_text_file(dir / "b.json"));
    CHECK(read_text_file(dir / "a.csv").find("80:20") != std::string::npos);

    r = invoke({"sweep-sf", "--features", dir / "f.csv", "--iterations", "3", "--sf-list", "1,2"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("sf,", 0) == 0);

    r = invoke({"analyze", "--features", dir / "f.csv", "--iterations", "3", "--ratios", "0.5", "--bins", "16",
             "--out-dir", dir / "an"});
    REQUIRE(r.code == 0);
    for (const char* f : {"distance_profile.csv", "hd_curve.csv", "hd_curve.json", "chernoff.json"})
      CHECK(fs::exists(dir.path / "an" / f));
    CHECK(nlohmann::json::parse(r.out).contains("violations"));

    r = invoke({"mccv", "--features", dir / "f.csv", "--reduce-to", "CNVM", "--iterations", "2", "--ratios", "0.5",
             "--kernel", "linear"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find(",linear,") != std::string::npos);
    r = invoke({"mccv", "--features", dir / "missing.csv"});
    CHECK(r.code == cli::kExitData);
    r = invoke({"mccv", "--features", dir / "f.csv", "--ratios", "1.5"});
    CHECK(r.code == cli::kExitUsage);

    const auto table = read_features_file(dir / "f.csv");
    std::string visits = feature_table_header() + "\n";
    for (std::size_t i = 0; i < 3; ++i) visits += format_feature_row(table.samples[i]) + "\n";
    write_text_file(dir / "v.csv", visits);
    r = invoke({"monitor", "--model", dir / "m.json", "--visits", dir / "v.csv"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["distances"].size() == 3);
    CHECK(j.contains("trend"));
  }

  TEST_CASE("convergence failures exit 4") {
    TempDir dir("fafscreen_cli_convergence");
    std::string csv = feature_table_header() + "\n";
    CounterRng rng(3);
    for (int i = 0; i < 30; ++i) {
      const bool sick = i == 0 || (i > 1 && rng.below(2) == 0);
      csv += "s" + std::to_string(i) + (sick ? ",1,STGD" : ",-1,NONE");
      for (int k = 0; k < 18; ++k) csv += "," + std::to_string((i * 7 + k * 13) % 17);
      csv += "\n";
    }
    write_text_file(dir / "f.csv", csv);
    const auto r = invoke({"train", "--features", dir / "f.csv", "--C", "1e6", "--sf", "3", "--max-passes", "1"});
    CHECK(r.code == cli::kExitConvergence);
    CHECK(nlohmann::json::parse(r.err)["error"]["kind"] == "ConvergenceError");
  }
}
