#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fafscreen/rng.hpp"
#include "fafscreen/svm.hpp"

namespace faf {

inline constexpr std::uint64_t kDefaultSeed = 20190521;

struct SplitSpec {
  double train_fraction = 0.8;
  std::size_t iterations = 5000;
  std::uint64_t base_seed = kDefaultSeed;

  void validate() const;
};

/// "80:20" style label for a training fraction.
std::string split_label(double train_fraction);

/// round-half-away(fraction * n) clamped to [1, n - 1]. Throws DataError
/// for classes with fewer than two samples.
std::size_t stratified_train_count(std::size_t class_size, double fraction);

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Per class, a uniformly random subset of stratified_train_count samples
/// goes to training; the rest to test.
SplitIndices stratified_split(const Dataset& data, double fraction, CounterRng& rng);
std::pair<Dataset, Dataset> stratified_split_data(const Dataset& data, double fraction, CounterRng& rng);

/// RNG stream for MCCV iteration k.
CounterRng iteration_rng(std::uint64_t base_seed, std::size_t iteration);

struct ConfusionCounts {
  // [predicted][actual], index 0 = Diseased, 1 = Healthy
  std::array<std::array<std::size_t, 2>, 2> n{};
  void add(Label actual, Label predicted);
};

/// Column-normalized percentages: columns are actual {Diseased, Healthy},
/// rows predicted {Diseased, Healthy}.
struct ConfusionMatrix {
  std::array<std::array<double, 2>, 2> pct{};
  double at(Label predicted, Label actual) const;
};

ConfusionMatrix confusion_from_counts(const ConfusionCounts& counts);
/// Pairs are (actual, predicted). Throws DataError if a class is absent.
ConfusionMatrix confusion_from_predictions(std::span<const std::pair<Label, Label>> pairs);

struct IterationRecord {
  double train_accuracy = 0.0;  // percent
  double test_accuracy = 0.0;
  ConfusionCounts test_counts;
  ConfusionMatrix test_confusion;
  std::shared_ptr<const SvmModel> model;  // set when models are kept
};

struct MccvSummary {
  double train_fraction = 0.0;
  SvmConfig config;
  std::size_t iterations = 0;
  std::uint64_t base_seed = 0;
  double train_acc_mean = 0.0;
  double train_acc_std = 0.0;
  double test_acc_mean = 0.0;
  double test_acc_std = 0.0;
  ConfusionMatrix confusion_mean;
  ConfusionMatrix confusion_std;
  std::vector<IterationRecord> records;
};

struct MccvOptions {
  unsigned threads = 1;
  bool keep_models = false;
};

/// Runs `fn(k, split, model)` for every MCCV iteration with the model
/// trained on that iteration's training subset. Results are stored by index.
/// Training failures are rethrown tagged with their iteration index.
template <typename Result, typename Fn>
std::vector<Result> map_iterations(const Dataset& data, const SvmConfig& cfg, const SplitSpec& split,
                                   unsigned threads, Fn&& fn);

MccvSummary run_mccv(const Dataset& data, const SvmConfig& cfg, const SplitSpec& split,
                     const MccvOptions& options = {});

struct SweepResult {
  std::vector<double> scale_factors;
  std::vector<MccvSummary> runs;
  std::size_t best_index = 0;
  double best_scale_factor() const { return scale_factors.at(best_index); }
};

/// One RBF run_mccv per scale factor; best = highest mean test accuracy,
/// ties to the smallest scale factor.
SweepResult scale_factor_sweep(const Dataset& data, std::span<const double> scale_factors,
                               const SplitSpec& split, double C, const SvmConfig& base = {},
                               const MccvOptions& options = {});

/// Mean and population std, accumulated in index order.
std::pair<double, double> mean_and_std(std::span<const double> values);

// ---------------------------------------------------------------- reports

nlohmann::json summary_to_json(const MccvSummary& summary, bool include_records = false);

/// Linear-vs-RBF comparison row for one split ratio.
struct ComparisonRow {
  MccvSummary linear;
  MccvSummary rbf;
};

/// Columns: split, linear train/test mean/std, sf, rbf train/test mean/std,
/// and gains. Mean gains are (rbf - linear) / rbf, std gains
/// (linear - rbf) / linear, all in percent.
std::string comparison_table_csv(std::span<const ComparisonRow> rows);
/// Single-kernel table: split, kernel, sf, train/test mean/std.
std::string summary_table_csv(std::span<const MccvSummary> rows);
std::string sweep_table_csv(const SweepResult& sweep);

}  // namespace faf

#include "fafscreen/mccv_impl.hpp"
