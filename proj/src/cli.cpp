#include "fafscreen/cli.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <filesystem>
#include <iostream>
#include <optional>

#include "fafscreen/dataset_io.hpp"
#include "fafscreen/grid.hpp"
#include "fafscreen/image.hpp"
#include "fafscreen/mccv.hpp"
#include "fafscreen/parallel.hpp"
#include "fafscreen/separation.hpp"
#include "fafscreen/service.hpp"
#include "fafscreen/svm.hpp"
#include "fafscreen/synth.hpp"
#include "fafscreen/text_format.hpp"

namespace faf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
  const char* kind() const noexcept override { return "UsageError"; }
};

// Accepts fractions ("0.8") or split labels ("80:20").
double parse_ratio(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    const auto v = parse_double(text);
    if (!v) throw UsageError("bad ratio '" + text + "'");
    return *v;
  }
  const auto a = parse_double(text.substr(0, colon));
  const auto b = parse_double(text.substr(colon + 1));
  if (!a || !b || *a <= 0 || *b <= 0) throw UsageError("bad ratio '" + text + "'");
  return *a / (*a + *b);
}

std::vector<double> parse_ratio_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& cell : split_csv_line(text)) out.push_back(parse_ratio(std::string(trim(cell))));
  if (out.empty()) throw UsageError("empty ratio list");
  return out;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& cell : split_csv_line(text)) {
    const auto v = parse_double(trim(cell));
    if (!v) throw UsageError("bad number '" + cell + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

Laterality parse_lat_flag(const std::string& text) {
  const auto lat = parse_laterality(text);
  if (!lat || *lat == Laterality::Unknown) throw UsageError("laterality must be OD or OS");
  return *lat;
}

Disease parse_disease_flag(const std::string& text) {
  const auto d = parse_disease(text);
  if (!d) throw UsageError("unknown disease '" + text + "'");
  return *d;
}

KernelKind parse_kernel_flag(const std::string& text) {
  const auto k = parse_kernel_kind(text);
  if (!k) throw UsageError("kernel must be linear or rbf");
  return *k;
}

void emit(std::ostream& out, const std::optional<std::string>& path, const std::string& text) {
  if (path)
    write_text_file(*path, text);
  else
    out << text;
}

Dataset load_training_table(const std::string& path, const std::string& reduce_to) {
  auto data = read_features_file(path);
  if (!reduce_to.empty()) data = data.reduced_to(parse_disease_flag(reduce_to));
  return data;
}

struct SvmFlags {
  std::string kernel = "rbf";
  double sf = 2.75;
  double C = 1.0;
  double kkt_tol = 1e-3;
  std::size_t max_passes = 2000;
  bool standardize = true;

  void attach(CLI::App* app, bool kernel_flag = true) {
    if (kernel_flag) app->add_option("--kernel", kernel, "linear | rbf")->capture_default_str();
    app->add_option("--sf", sf, "RBF scale factor")->capture_default_str();
    app->add_option("--C", C, "box constraint")->capture_default_str();
    app->add_option("--kkt-tol", kkt_tol, "KKT tolerance")->capture_default_str();
    app->add_option("--max-passes", max_passes, "update budget per sample")->capture_default_str();
    app->add_option("--standardize", standardize, "z-score features with training statistics")
        ->capture_default_str();
  }

  SvmConfig config(KernelKind kind) const {
    SvmConfig cfg;
    cfg.kernel = kind == KernelKind::Linear ? KernelSpec::linear() : KernelSpec::rbf(sf);
    cfg.C = C;
    cfg.kkt_tolerance = kkt_tol;
    cfg.max_passes = max_passes;
    cfg.standardize = standardize;
    return cfg;
  }
};

struct Cli {
  std::ostream& out;
  std::ostream& err;
  CLI::App app{"FAF retinal screening toolkit", "fafscreen"};
  std::function<void()> action;

  Cli(std::ostream& o, std::ostream& e) : out(o), err(e) {
    app.require_subcommand(1);
    add_features();
    add_featurize_manifest();
    add_train();
    add_predict();
    add_mccv();
    add_sweep();
    add_analyze();
    add_monitor();
    add_synth();
    add_serve();
  }

  // ------------------------------------------------------------ features
  struct FeaturesArgs {
    std::string image, laterality, id, disease = "NONE", out;
    double cx = 0, cy = 0, r1 = 0, r2 = 0, r3 = 0;
    bool flip = false, no_header = false;
  } fa;

  void add_features() {
    auto* c = app.add_subcommand("features", "compute the 18 sector features of one image");
    c->add_option("--image", fa.image, "PGM or PNG file")->required();
    c->add_option("--cx", fa.cx)->required();
    c->add_option("--cy", fa.cy)->required();
    c->add_option("--r1", fa.r1)->required();
    c->add_option("--r2", fa.r2)->required();
    c->add_option("--r3", fa.r3)->required();
    c->add_option("--laterality", fa.laterality, "OD | OS")->required();
    c->add_flag("--flip-nasal", fa.flip, "mirror the nasal side");
    c->add_option("--id", fa.id, "row id (default: file stem)");
    c->add_option("--disease", fa.disease, "NONE | STGD | CNVM | CSCR")->capture_default_str();
    c->add_option("--out", fa.out, "append the row to this feature table");
    c->add_flag("--no-header", fa.no_header, "omit the header when printing");
    c->callback([this] { action = [this] { run_features(); }; });
  }

  void run_features() {
    GridSpec g{fa.cx, fa.cy, fa.r1, fa.r2, fa.r3, parse_lat_flag(fa.laterality), fa.flip};
    g.validate();
    const auto img = load_image_file(fa.image);
    LabeledSample s;
    s.id = fa.id.empty() ? fs::path(fa.image).stem().string() : fa.id;
    s.disease = parse_disease_flag(fa.disease);
    s.label = s.disease == Disease::NONE ? Label::Healthy : Label::Diseased;
    s.features = to_vector(compute_features(img, g));
    const auto row = format_feature_row(s) + "\n";
    if (fa.out.empty()) {
      if (!fa.no_header) out << feature_table_header() << "\n";
      out << row;
      return;
    }
    std::string existing;
    if (fs::exists(fa.out)) existing = read_text_file(fa.out);
    if (existing.empty()) {
      write_text_file(fa.out, feature_table_header() + "\n" + row);
    } else {
      auto table = read_features(existing);
      for (const auto& t : table.samples)
        if (t.id == s.id) throw DataError("duplicate sample id '" + s.id + "' in " + fa.out);
      if (existing.back() != '\n') existing += "\n";
      write_text_file(fa.out, existing + row);
    }
  }

  // ------------------------------------------------------------ featurize-manifest
  struct ManifestArgs {
    std::string manifest, out;
    unsigned threads = 1;
  } ma;

  void add_featurize_manifest() {
    auto* c = app.add_subcommand("featurize-manifest", "featurize every image listed in a manifest");
    c->add_option("--manifest", ma.manifest)->required();
    c->add_option("--out", ma.out, "feature table (stdout if omitted)");
    c->add_option("--threads", ma.threads)->capture_default_str();
    c->callback([this] { action = [this] { run_featurize_manifest(); }; });
  }

  void run_featurize_manifest() {
    const auto entries = read_manifest(read_text_file(ma.manifest));
    const auto base = fs::path(ma.manifest).parent_path();
    Dataset table;
    table.samples.resize(entries.size());
    parallel_for(entries.size(), ma.threads, [&](std::size_t i) {
      const auto& e = entries[i];
      e.grid.validate();
      const auto img = load_image_file(base / e.filename);
      auto& s = table.samples[i];
      s.id = fs::path(e.filename).stem().string();
      s.label = e.label;
      s.disease = e.disease;
      s.features = to_vector(compute_features(img, e.grid));
    });
    table.validate();
    emit(out, ma.out.empty() ? std::nullopt : std::optional(ma.out), write_features(table));
  }

  // ------------------------------------------------------------ train
  struct TrainArgs {
    std::string features, out, reduce_to;
    SvmFlags svm;
  } ta;

  void add_train() {
    auto* c = app.add_subcommand("train", "train an SVM on a feature table");
    c->add_option("--features", ta.features)->required();
    c->add_option("--out", ta.out, "model file (stdout if omitted)");
    c->add_option("--reduce-to", ta.reduce_to, "keep healthy plus one disease");
    ta.svm.attach(c);
    c->callback([this] { action = [this] { run_train(); }; });
  }

  void run_train() {
    const auto data = load_training_table(ta.features, ta.reduce_to);
    const auto model = train(data, ta.svm.config(parse_kernel_flag(ta.svm.kernel)));
    emit(out, ta.out.empty() ? std::nullopt : std::optional(ta.out), save_model(model));
  }

  // ------------------------------------------------------------ predict
  struct PredictArgs {
    std::string model, features, out;
  } pa;

  void add_predict() {
    auto* c = app.add_subcommand("predict", "label rows with a saved model");
    c->add_option("--model", pa.model)->required();
    c->add_option("--features", pa.features, "CSV with an id column followed by values")->required();
    c->add_option("--out", pa.out);
    c->callback([this] { action = [this] { run_predict(); }; });
  }

  void run_predict() {
    const auto model = load_model(read_text_file(pa.model));
    const auto rows = read_input_rows(read_text_file(pa.features));
    const double norm = rkhs_weight_norm(model);
    std::string csv = "id,label,decision_value,signed_distance\n";
    for (const auto& r : rows) {
      const double f = decision_value(model, r.values);
      csv += r.id + "," + (f >= 0.0 ? "1" : "-1") + "," + format_double(f) + "," +
             format_double(signed_distance(model, r.values, norm)) + "\n";
    }
    emit(out, pa.out.empty() ? std::nullopt : std::optional(pa.out), csv);
  }

  // ------------------------------------------------------------ mccv
  struct MccvArgs {
    std::string features, kernel = "both", ratios = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", out_csv, out_json,
                                           reduce_to;
    std::size_t iterations = 5000;
    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 1;
    bool records = false;
    SvmFlags svm;
  } mc;

  void add_mccv() {
    auto* c = app.add_subcommand("mccv", "Monte Carlo cross-validation over split ratios");
    c->add_option("--features", mc.features)->required();
    c->add_option("--kernel", mc.kernel, "linear | rbf | both")->capture_default_str();
    c->add_option("--ratios", mc.ratios, "train fractions or a:b labels")->capture_default_str();
    c->add_option("--iterations", mc.iterations)->capture_default_str();
    c->add_option("--seed", mc.seed)->capture_default_str();
    c->add_option("--threads", mc.threads)->capture_default_str();
    c->add_option("--reduce-to", mc.reduce_to);
    c->add_option("--out-csv", mc.out_csv);
    c->add_option("--out-json", mc.out_json, "summaries with confusion matrices");
    c->add_flag("--records", mc.records, "include per-iteration records in the JSON");
    mc.svm.attach(c, false);
    c->callback([this] { action = [this] { run_mccv_cmd(); }; });
  }

  void run_mccv_cmd() {
    const auto data = load_training_table(mc.features, mc.reduce_to);
    const auto ratios = parse_ratio_list(mc.ratios);
    const bool both = mc.kernel == "both";
    const auto single = both ? KernelKind::Rbf : parse_kernel_flag(mc.kernel);
    const MccvOptions opts{mc.threads, false};
    std::vector<ComparisonRow> rows;
    std::vector<MccvSummary> singles;
    auto summaries = json::array();
    for (double r : ratios) {
      const SplitSpec split{r, mc.iterations, mc.seed};
      if (both) {
        ComparisonRow row{run_mccv(data, mc.svm.config(KernelKind::Linear), split, opts),
                          run_mccv(data, mc.svm.config(KernelKind::Rbf), split, opts)};
        summaries.push_back(summary_to_json(row.linear, mc.records));
        summaries.push_back(summary_to_json(row.rbf, mc.records));
        rows.push_back(std::move(row));
      } else {
        singles.push_back(run_mccv(data, mc.svm.config(single), split, opts));
        summaries.push_back(summary_to_json(singles.back(), mc.records));
      }
    }
    const auto csv = both ? comparison_table_csv(rows) : summary_table_csv(singles);
    emit(out, mc.out_csv.empty() ? std::nullopt : std::optional(mc.out_csv), csv);
    if (!mc.out_json.empty()) write_text_file(mc.out_json, dump_json({{"runs", summaries}}, 1) + "\n");
  }

  // ------------------------------------------------------------ sweep-sf
  struct SweepArgs {
    std::string features, sf_list = "1,2,2.75,4,5", ratio = "0.8", out_csv, out_json, reduce_to;
    std::size_t iterations = 5000;
    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 1;
    SvmFlags svm;
  } sw;

  void add_sweep() {
    auto* c = app.add_subcommand("sweep-sf", "RBF accuracy across scale factors");
    c->add_option("--features", sw.features)->required();
    c->add_option("--sf-list", sw.sf_list)->capture_default_str();
    c->add_option("--ratio", sw.ratio)->capture_default_str();
    c->add_option("--iterations", sw.iterations)->capture_default_str();
    c->add_option("--seed", sw.seed)->capture_default_str();
    c->add_option("--threads", sw.threads)->capture_default_str();
    c->add_option("--reduce-to", sw.reduce_to);
    c->add_option("--out-csv", sw.out_csv);
    c->add_option("--out-json", sw.out_json);
    sw.svm.attach(c, false);
    c->callback([this] { action = [this] { run_sweep(); }; });
  }

  void run_sweep() {
    const auto data = load_training_table(sw.features, sw.reduce_to);
    const auto sfs = parse_number_list(sw.sf_list);
    const SplitSpec split{parse_ratio(sw.ratio), sw.iterations, sw.seed};
    const auto result =
        scale_factor_sweep(data, sfs, split, sw.svm.C, sw.svm.config(KernelKind::Rbf), {sw.threads, false});
    emit(out, sw.out_csv.empty() ? std::nullopt : std::optional(sw.out_csv), sweep_table_csv(result));
    if (!sw.out_json.empty()) {
      auto runs = json::array();
      for (const auto& r : result.runs) runs.push_back(summary_to_json(r));
      write_text_file(sw.out_json,
                      dump_json({{"best_scale_factor", result.best_scale_factor()}, {"runs", runs}}, 1) + "\n");
    }
  }

  // ------------------------------------------------------------ analyze
  struct AnalyzeArgs {
    std::string features, ratios = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", profile_ratio = "0.8", out_dir,
                          reduce_to;
    std::size_t iterations = 5000, bins = kDefaultBins;
    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 1;
    SvmFlags svm;
  } an;

  void add_analyze() {
    auto* c = app.add_subcommand("analyze", "signed distances, Hellinger curve and Chernoff check");
    c->add_option("--features", an.features)->required();
    c->add_option("--ratios", an.ratios)->capture_default_str();
    c->add_option("--profile-ratio", an.profile_ratio, "split used for the distance profile")
        ->capture_default_str();
    c->add_option("--iterations", an.iterations)->capture_default_str();
    c->add_option("--bins", an.bins)->capture_default_str();
    c->add_option("--seed", an.seed)->capture_default_str();
    c->add_option("--threads", an.threads)->capture_default_str();
    c->add_option("--reduce-to", an.reduce_to);
    c->add_option("--out-dir", an.out_dir, "writes distance_profile.csv, hd_curve.csv/json, chernoff.json");
    an.svm.attach(c);
    c->callback([this] { action = [this] { run_analyze(); }; });
  }

  void run_analyze() {
    if (an.bins == 0) throw UsageError("--bins must be positive");
    const auto data = load_training_table(an.features, an.reduce_to);
    const auto cfg = an.svm.config(parse_kernel_flag(an.svm.kernel));
    const auto ratios = parse_ratio_list(an.ratios);
    const auto profile =
        distance_profile(data, cfg, {parse_ratio(an.profile_ratio), an.iterations, an.seed}, an.threads);
    const auto curve = hd_curve(data, cfg, ratios, an.iterations, an.seed, an.bins, an.threads);
    const auto report = chernoff_report(curve);
    if (!an.out_dir.empty()) {
      fs::create_directories(an.out_dir);
      const fs::path dir = an.out_dir;
      write_text_file(dir / "distance_profile.csv", profile_csv(profile));
      write_text_file(dir / "hd_curve.csv", hd_curve_csv(curve));
      write_text_file(dir / "hd_curve.json", dump_json(hd_curve_json(curve), 1) + "\n");
      write_text_file(dir / "chernoff.json", dump_json(chernoff_json(report), 1) + "\n");
    }
    out << dump_json(chernoff_json(report), 1) << "\n";
  }

  // ------------------------------------------------------------ monitor
  struct MonitorArgs {
    std::string model, visits;
    double epsilon = kDefaultTrendEpsilon;
  } mo;

  void add_monitor() {
    auto* c = app.add_subcommand("monitor", "signed-distance trajectory over visits");
    c->add_option("--model", mo.model)->required();
    c->add_option("--visits", mo.visits, "feature rows in visit order")->required();
    c->add_option("--epsilon", mo.epsilon, "slope dead band")->capture_default_str();
    c->callback([this] { action = [this] { run_monitor(); }; });
  }

  void run_monitor() {
    const auto model = load_model(read_text_file(mo.model));
    const auto rows = read_input_rows(read_text_file(mo.visits));
    std::vector<std::vector<double>> visits;
    auto ids = json::array();
    for (const auto& r : rows) {
      visits.push_back(r.values);
      ids.push_back(r.id);
    }
    const auto t = monitor_trajectory(model, visits, mo.epsilon);
    out << dump_json({{"visits", ids},
                      {"distances", t.distances},
                      {"slope", t.slope},
                      {"trend", std::string(to_string(t.trend))}},
                     1)
        << "\n";
  }

  // ------------------------------------------------------------ synth
  struct SynthArgs {
    std::string params, out, features;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
  } sy;

  void add_synth() {
    auto* c = app.add_subcommand("synth", "generate a synthetic FAF cohort");
    c->add_option("--params", sy.params, "JSON overrides");
    c->add_option("--out", sy.out, "output directory for images and manifest.csv")->required();
    c->add_option("--seed", sy.seed);
    c->add_option("--threads", sy.threads)->capture_default_str();
    c->add_option("--features", sy.features, "also write the feature table here");
    c->callback([this] { action = [this] { run_synth(); }; });
  }

  void run_synth() {
    auto params = sy.params.empty() ? SynthParams{} : SynthParams::from_json(json::parse(read_text_file(sy.params)));
    if (sy.seed) params.seed = *sy.seed;
    params.validate();
    const auto samples = generate_dataset(params, sy.threads);
    write_synthetic(samples, sy.out);
    if (!sy.features.empty()) write_features_file(sy.features, featurize(samples, sy.threads));
    out << dump_json({{"images", samples.size()}, {"out", sy.out}, {"seed", params.seed}}) << "\n";
  }

  // ------------------------------------------------------------ serve
  struct ServeArgs {
    std::string host = "0.0.0.0", data = "sessions", models = "models", static_dir;
    int port = 8080;
  } se;

  void add_serve() {
    auto* c = app.add_subcommand("serve", "run the HTTP screening service");
    c->add_option("--port", se.port)->capture_default_str();
    c->add_option("--host", se.host)->capture_default_str();
    c->add_option("--data", se.data, "session store directory")->capture_default_str();
    c->add_option("--models", se.models, "model directory")->capture_default_str();
    c->add_option("--static", se.static_dir, "static assets mounted at /");
    c->callback([this] { action = [this] { run_serve(); }; });
  }

  void run_serve() {
    service::ScreenService svc(se.data, se.models);
    httplib::Server server;
    std::optional<fs::path> static_dir;
    if (!se.static_dir.empty()) static_dir = se.static_dir;
    service::bind_routes(server, svc, static_dir);
    err << "listening on " << se.host << ":" << se.port << "\n";
    if (!server.listen(se.host, se.port)) throw Error("cannot listen on " + se.host + ":" + std::to_string(se.port));
  }
};

int fail(std::ostream& err, int code, std::string_view kind, std::string_view message) {
  err << dump_json({{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}) << "\n";
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Cli cli(out, err);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    cli.app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << cli.app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << cli.app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return fail(err, kExitUsage, "UsageError", e.what());
  }
  try {
    if (cli.action) cli.action();
    return kExitOk;
  } catch (const ConvergenceError& e) {
    return fail(err, kExitConvergence, e.kind(), e.what());
  } catch (const InvalidArgument& e) {
    return fail(err, kExitUsage, e.kind(), e.what());
  } catch (const Error& e) {
    return fail(err, kExitData, e.kind(), e.what());
  } catch (const json::exception& e) {
    return fail(err, kExitData, "DataError", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(err, kExitData, "DataError", e.what());
  }
}

}  // namespace faf::cli
