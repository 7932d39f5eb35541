#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fafscreen/mccv.hpp"

namespace faf {

/// Signed distances of every dataset sample to every MCCV iteration's
/// decision boundary, tagged with that iteration's train/test membership.
struct DistanceProfile {
  double train_fraction = 0.0;
  std::vector<std::string> ids;
  std::vector<Label> labels;
  std::vector<Disease> diseases;
  std::vector<double> mean;  // per sample, over iterations
  std::vector<double> std;
  std::vector<std::vector<double>> distances;  // [iteration][sample]
  std::vector<std::vector<char>> in_train;     // [iteration][sample]
  std::vector<double> train_accuracy;          // [iteration], percent
  std::vector<double> test_accuracy;

  std::size_t iterations() const noexcept { return distances.size(); }
};

DistanceProfile distance_profile(const Dataset& data, const SvmConfig& cfg, const SplitSpec& split,
                                 unsigned threads = 1);

struct Histogram {
  std::vector<double> edges;  // B + 1, strictly increasing
  std::vector<double> probs;  // B, sums to 1
};

/// B equal-width bins spanning [lo, hi]; the last edge is exactly hi.
std::vector<double> equal_width_edges(double lo, double hi, std::size_t bins);

/// Bins are [e_i, e_{i+1}) except the last, which is closed. Throws on empty
/// input or values outside [e_0, e_B].
Histogram build_histogram(std::span<const double> values, std::span<const double> edges);

/// (1 - sum sqrt(p q))^(1/2), clamped to [0, 1]. Edges must match exactly.
double hellinger(const Histogram& p, const Histogram& q);

inline constexpr std::size_t kDefaultBins = 64;

struct HdPoint {
  double train_fraction = 0.0;
  double h_train = 0.0;
  double h_test = 0.0;
  double pe_train = 0.0;  // 1 - mean accuracy, as a fraction
  double pe_test = 0.0;
  double root_acc_train = 0.0;  // sqrt(1 - Pe)
  double root_acc_test = 0.0;
  double fraction_train = 0.0;  // H / sqrt(1 - Pe)
  double fraction_test = 0.0;
};

struct HdCurve {
  std::vector<HdPoint> points;
};

/// Pools distances per membership group (train/test) and class, bins both
/// classes on shared equal-width edges over the pooled range, and pairs H
/// with the MCCV error rate of the same membership. p = healthy, q = diseased.
HdPoint hd_point(const DistanceProfile& profile, std::size_t bins = kDefaultBins);

HdCurve hd_curve(const Dataset& data, const SvmConfig& cfg, std::span<const double> ratios,
                 std::size_t iterations, std::uint64_t base_seed, std::size_t bins = kDefaultBins,
                 unsigned threads = 1);

struct ChernoffCheck {
  bool holds = false;
  double margin = 0.0;  // sqrt(1 - Pe) - H
};

/// Strict H < sqrt(1 - Pe). Throws for Pe == 1 or inputs out of range.
ChernoffCheck chernoff_check(double hellinger_distance, double error_rate);

struct ChernoffEntry {
  double train_fraction = 0.0;
  std::string membership;  // "train" or "test"
  double h = 0.0;
  double pe = 0.0;
  ChernoffCheck check;
};

struct ChernoffReport {
  std::vector<ChernoffEntry> entries;
  std::size_t violations = 0;
};

ChernoffReport chernoff_report(const HdCurve& curve);

enum class Trend { Improving, Worsening, Stable };
std::string_view to_string(Trend trend);

struct Trajectory {
  std::vector<double> distances;
  double slope = 0.0;  // least squares over visit index
  Trend trend = Trend::Stable;
};

inline constexpr double kDefaultTrendEpsilon = 0.05;

/// Positive slope moves toward the healthy side: Improving when the slope
/// exceeds epsilon, Worsening below -epsilon, otherwise Stable.
Trajectory trajectory_from_distances(std::vector<double> distances, double epsilon = kDefaultTrendEpsilon);
Trajectory monitor_trajectory(const SvmModel& model, std::span<const std::vector<double>> visits,
                              double epsilon = kDefaultTrendEpsilon);

std::string profile_csv(const DistanceProfile& profile);
std::string hd_curve_csv(const HdCurve& curve);
nlohmann::json hd_curve_json(const HdCurve& curve);
nlohmann::json chernoff_json(const ChernoffReport& report);

}  // namespace faf
