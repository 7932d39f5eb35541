#include "fafscreen/mccv.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <tuple>

#include "fafscreen/text_format.hpp"

namespace faf {

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InvalidArgument("split fraction must lie in (0, 1)");
  if (iterations == 0) throw InvalidArgument("MCCV iterations must be positive");
}

std::string split_label(double train_fraction) {
  const long train = std::lround(100.0 * train_fraction);
  return std::to_string(train) + ":" + std::to_string(100 - train);
}

std::size_t stratified_train_count(std::size_t class_size, double fraction) {
  if (class_size < 2)
    throw DataError("stratified split: each class needs at least 2 samples, found " +
                    std::to_string(class_size));
  const double raw = std::round(fraction * static_cast<double>(class_size));  // half away from zero
  const auto count = static_cast<std::size_t>(raw);
  return std::clamp<std::size_t>(count, 1, class_size - 1);
}

CounterRng iteration_rng(std::uint64_t base_seed, std::size_t iteration) {
  return CounterRng(base_seed, static_cast<std::uint64_t>(iteration));
}

SplitIndices stratified_split(const Dataset& data, double fraction, CounterRng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("split fraction must lie in (0, 1)");
  std::vector<std::size_t> diseased;
  std::vector<std::size_t> healthy;
  for (std::size_t i = 0; i < data.size(); ++i)
    (data.samples[i].label == Label::Diseased ? diseased : healthy).push_back(i);
  const std::size_t n_d = stratified_train_count(diseased.size(), fraction);
  const std::size_t n_h = stratified_train_count(healthy.size(), fraction);

  std::vector<bool> in_train(data.size(), false);
  for (auto* group : {&diseased, &healthy}) {
    const std::size_t take = group == &diseased ? n_d : n_h;
    rng.shuffle(std::span<std::size_t>(*group));
    for (std::size_t t = 0; t < take; ++t) in_train[(*group)[t]] = true;
  }
  SplitIndices out;
  out.train.reserve(n_d + n_h);
  out.test.reserve(data.size() - n_d - n_h);
  for (std::size_t i = 0; i < data.size(); ++i) (in_train[i] ? out.train : out.test).push_back(i);
  return out;
}

std::pair<Dataset, Dataset> stratified_split_data(const Dataset& data, double fraction, CounterRng& rng) {
  const auto idx = stratified_split(data, fraction, rng);
  return {data.subset(idx.train), data.subset(idx.test)};
}

// ---------------------------------------------------------------- confusion

namespace {
constexpr std::size_t slot(Label l) { return l == Label::Diseased ? 0 : 1; }
}  // namespace

void ConfusionCounts::add(Label actual, Label predicted) { ++n[slot(predicted)][slot(actual)]; }

double ConfusionMatrix::at(Label predicted, Label actual) const { return pct[slot(predicted)][slot(actual)]; }

ConfusionMatrix confusion_from_counts(const ConfusionCounts& counts) {
  ConfusionMatrix m;
  for (std::size_t col = 0; col < 2; ++col) {
    const std::size_t total = counts.n[0][col] + counts.n[1][col];
    if (total == 0)
      throw DataError(std::string("confusion matrix: no samples of actual class ") +
                      (col == 0 ? "Diseased" : "Healthy"));
    m.pct[0][col] = 100.0 * static_cast<double>(counts.n[0][col]) / static_cast<double>(total);
    m.pct[1][col] = 100.0 - m.pct[0][col];
  }
  return m;
}

ConfusionMatrix confusion_from_predictions(std::span<const std::pair<Label, Label>> pairs) {
  ConfusionCounts counts;
  for (const auto& [actual, predicted] : pairs) counts.add(actual, predicted);
  return confusion_from_counts(counts);
}

std::pair<double, double> mean_and_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / n)};
}

// ---------------------------------------------------------------- MCCV

namespace {

double accuracy_percent(const SvmModel& model, const Dataset& data, std::span<const std::size_t> idx,
                        ConfusionCounts* counts) {
  std::size_t correct = 0;
  for (auto i : idx) {
    const auto& s = data.samples[i];
    const Label predicted = classify(model, s.features);
    if (predicted == s.label) ++correct;
    if (counts) counts->add(s.label, predicted);
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(idx.size());
}

}  // namespace

MccvSummary run_mccv(const Dataset& data, const SvmConfig& cfg, const SplitSpec& split,
                     const MccvOptions& options) {
  auto records = map_iterations<IterationRecord>(
      data, cfg, split, options.threads, [&](std::size_t, const SplitIndices& idx, SvmModel model) {
        IterationRecord r;
        r.train_accuracy = accuracy_percent(model, data, idx.train, nullptr);
        r.test_accuracy = accuracy_percent(model, data, idx.test, &r.test_counts);
        r.test_confusion = confusion_from_counts(r.test_counts);
        if (options.keep_models) r.model = std::make_shared<const SvmModel>(std::move(model));
        return r;
      });

  MccvSummary s;
  s.train_fraction = split.train_fraction;
  s.config = cfg;
  s.iterations = split.iterations;
  s.base_seed = split.base_seed;
  std::vector<double> buf(records.size());
  const auto stat = [&](auto&& get) {
    for (std::size_t k = 0; k < records.size(); ++k) buf[k] = get(records[k]);
    return mean_and_std(buf);
  };
  std::tie(s.train_acc_mean, s.train_acc_std) = stat([](const IterationRecord& r) { return r.train_accuracy; });
  std::tie(s.test_acc_mean, s.test_acc_std) = stat([](const IterationRecord& r) { return r.test_accuracy; });
  for (std::size_t row = 0; row < 2; ++row)
    for (std::size_t col = 0; col < 2; ++col)
      std::tie(s.confusion_mean.pct[row][col], s.confusion_std.pct[row][col]) =
          stat([&](const IterationRecord& r) { return r.test_confusion.pct[row][col]; });
  s.records = std::move(records);
  return s;
}

SweepResult scale_factor_sweep(const Dataset& data, std::span<const double> scale_factors,
                               const SplitSpec& split, double C, const SvmConfig& base,
                               const MccvOptions& options) {
  if (scale_factors.empty()) throw InvalidArgument("scale-factor sweep: empty SF list");
  for (double sf : scale_factors)
    if (!(sf > 0.0)) throw InvalidArgument("scale-factor sweep: SF values must be positive");
  SweepResult out;
  out.scale_factors.assign(scale_factors.begin(), scale_factors.end());
  for (double sf : scale_factors) {
    SvmConfig cfg = base;
    cfg.kernel = KernelSpec::rbf(sf);
    cfg.C = C;
    out.runs.push_back(run_mccv(data, cfg, split, options));
  }
  for (std::size_t k = 1; k < out.runs.size(); ++k) {
    const double acc = out.runs[k].test_acc_mean;
    const double best = out.runs[out.best_index].test_acc_mean;
    if (acc > best || (acc == best && out.scale_factors[k] < out.scale_factors[out.best_index]))
      out.best_index = k;
  }
  return out;
}

// ---------------------------------------------------------------- reports

namespace {

nlohmann::json matrix_json(const ConfusionMatrix& m) {
  return {{"predicted_diseased", {{"actual_diseased", m.pct[0][0]}, {"actual_healthy", m.pct[0][1]}}},
          {"predicted_healthy", {{"actual_diseased", m.pct[1][0]}, {"actual_healthy", m.pct[1][1]}}}};
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

nlohmann::json summary_to_json(const MccvSummary& s, bool include_records) {
  nlohmann::json j = {
      {"split", split_label(s.train_fraction)},
      {"train_fraction", s.train_fraction},
      {"kernel", std::string(to_string(s.config.kernel.kind))},
      {"scale_factor", s.config.kernel.scale_factor},
      {"C", s.config.C},
      {"standardize", s.config.standardize},
      {"iterations", s.iterations},
      {"base_seed", s.base_seed},
      {"train_accuracy", {{"mean", s.train_acc_mean}, {"std", s.train_acc_std}}},
      {"test_accuracy", {{"mean", s.test_acc_mean}, {"std", s.test_acc_std}}},
      {"test_confusion_mean", matrix_json(s.confusion_mean)},
      {"test_confusion_std", matrix_json(s.confusion_std)},
  };
  if (include_records) {
    auto& recs = j["records"] = nlohmann::json::array();
    for (const auto& r : s.records)
      recs.push_back({{"train_accuracy", r.train_accuracy}, {"test_accuracy", r.test_accuracy}});
  }
  return j;
}

std::string comparison_table_csv(std::span<const ComparisonRow> rows) {
  std::string out =
      "split,linear_train_mean,linear_train_std,linear_test_mean,linear_test_std,sf,"
      "rbf_train_mean,rbf_train_std,rbf_test_mean,rbf_test_std,"
      "gain_train_mean,gain_train_std,gain_test_mean,gain_test_std\n";
  const auto gain_mean = [](double lin, double rbf) { return rbf == 0.0 ? 0.0 : 100.0 * (rbf - lin) / rbf; };
  const auto gain_std = [](double lin, double rbf) { return lin == 0.0 ? 0.0 : 100.0 * (lin - rbf) / lin; };
  for (const auto& r : rows) {
    const auto& a = r.linear;
    const auto& e = r.rbf;
    out += split_label(a.train_fraction) + "," + fmt(a.train_acc_mean) + "," + fmt(a.train_acc_std) + "," +
           fmt(a.test_acc_mean) + "," + fmt(a.test_acc_std) + "," + fmt(e.config.kernel.scale_factor) + "," +
           fmt(e.train_acc_mean) + "," + fmt(e.train_acc_std) + "," + fmt(e.test_acc_mean) + "," +
           fmt(e.test_acc_std) + "," + fmt(gain_mean(a.train_acc_mean, e.train_acc_mean)) + "," +
           fmt(gain_std(a.train_acc_std, e.train_acc_std)) + "," +
           fmt(gain_mean(a.test_acc_mean, e.test_acc_mean)) + "," +
           fmt(gain_std(a.test_acc_std, e.test_acc_std)) + "\n";
  }
  return out;
}

std::string summary_table_csv(std::span<const MccvSummary> rows) {
  std::string out = "split,kernel,sf,C,train_mean,train_std,test_mean,test_std\n";
  for (const auto& s : rows) {
    out += split_label(s.train_fraction) + "," + std::string(to_string(s.config.kernel.kind)) + "," +
           (s.config.kernel.kind == KernelKind::Rbf ? fmt(s.config.kernel.scale_factor) : std::string()) + "," +
           fmt(s.config.C) + "," + fmt(s.train_acc_mean) + "," + fmt(s.train_acc_std) + "," +
           fmt(s.test_acc_mean) + "," + fmt(s.test_acc_std) + "\n";
  }
  return out;
}

std::string sweep_table_csv(const SweepResult& sweep) {
  std::string out = "sf,train_mean,train_std,test_mean,test_std,best\n";
  for (std::size_t k = 0; k < sweep.runs.size(); ++k) {
    const auto& s = sweep.runs[k];
    out += fmt(sweep.scale_factors[k]) + "," + fmt(s.train_acc_mean) + "," + fmt(s.train_acc_std) + "," +
           fmt(s.test_acc_mean) + "," + fmt(s.test_acc_std) + "," + (k == sweep.best_index ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace faf
