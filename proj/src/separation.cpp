#include "fafscreen/separation.hpp"

#include <algorithm>
#include <cmath>

#include "fafscreen/text_format.hpp"

namespace faf {

namespace {

struct IterationDistances {
  std::vector<double> distance;
  std::vector<char> in_train;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

}  // namespace

DistanceProfile distance_profile(const Dataset& data, const SvmConfig& cfg, const SplitSpec& split,
                                 unsigned threads) {
  auto per_iter = map_iterations<IterationDistances>(
      data, cfg, split, threads, [&](std::size_t, const SplitIndices& idx, const SvmModel& model) {
        IterationDistances it;
        const double norm = rkhs_weight_norm(model);
        it.distance.resize(data.size());
        it.in_train.assign(data.size(), 0);
        for (auto i : idx.train) it.in_train[i] = 1;
        std::size_t train_ok = 0;
        std::size_t test_ok = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
          const auto& s = data.samples[i];
          const double f = decision_value(model, s.features);
          it.distance[i] = -f / norm;
          const bool correct = (f >= 0.0 ? Label::Diseased : Label::Healthy) == s.label;
          if (correct) ++(it.in_train[i] ? train_ok : test_ok);
        }
        it.train_accuracy = 100.0 * static_cast<double>(train_ok) / static_cast<double>(idx.train.size());
        it.test_accuracy = 100.0 * static_cast<double>(test_ok) / static_cast<double>(idx.test.size());
        return it;
      });

  DistanceProfile p;
  p.train_fraction = split.train_fraction;
  for (const auto& s : data.samples) {
    p.ids.push_back(s.id);
    p.labels.push_back(s.label);
    p.diseases.push_back(s.disease);
  }
  for (auto& it : per_iter) {
    p.distances.push_back(std::move(it.distance));
    p.in_train.push_back(std::move(it.in_train));
    p.train_accuracy.push_back(it.train_accuracy);
    p.test_accuracy.push_back(it.test_accuracy);
  }
  std::vector<double> column(p.iterations());
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < p.iterations(); ++k) column[k] = p.distances[k][i];
    const auto [m, sd] = mean_and_std(column);
    p.mean.push_back(m);
    p.std.push_back(sd);
  }
  return p;
}

std::vector<double> equal_width_edges(double lo, double hi, std::size_t bins) {
  if (bins == 0) throw InvalidArgument("histogram: bin count must be positive");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw DataError("histogram: degenerate range (all values equal)");
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i < bins; ++i)
    edges[i] = lo + (hi - lo) * (static_cast<double>(i) / static_cast<double>(bins));
  edges[bins] = hi;
  for (std::size_t i = 1; i <= bins; ++i)
    if (!(edges[i] > edges[i - 1])) throw DataError("histogram: range too narrow for bin count");
  return edges;
}

Histogram build_histogram(std::span<const double> values, std::span<const double> edges) {
  if (values.empty()) throw InvalidArgument("histogram: empty input");
  if (edges.size() < 2) throw InvalidArgument("histogram: need at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw InvalidArgument("histogram: edges must be strictly increasing");
  const std::size_t bins = edges.size() - 1;
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    if (!(v >= edges.front() && v <= edges.back()))
      throw InvalidArgument("histogram: value " + format_double(v) + " outside edge range");
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t bin = static_cast<std::size_t>(it - edges.begin()) - 1;
    if (bin >= bins) bin = bins - 1;  // v == last edge
    ++counts[bin];
  }
  Histogram h;
  h.edges.assign(edges.begin(), edges.end());
  h.probs.resize(bins);
  const auto total = static_cast<double>(values.size());
  for (std::size_t b = 0; b < bins; ++b) h.probs[b] = static_cast<double>(counts[b]) / total;
  return h;
}

double hellinger(const Histogram& p, const Histogram& q) {
  if (p.edges != q.edges || p.probs.size() != q.probs.size())
    throw InvalidArgument("hellinger: histograms have mismatched bin edges");
  double overlap = 0.0;
  for (std::size_t b = 0; b < p.probs.size(); ++b) overlap += std::sqrt(p.probs[b] * q.probs[b]);
  return std::sqrt(std::clamp(1.0 - overlap, 0.0, 1.0));
}

HdPoint hd_point(const DistanceProfile& profile, std::size_t bins) {
  HdPoint pt;
  pt.train_fraction = profile.train_fraction;
  for (int membership = 1; membership >= 0; --membership) {
    std::vector<double> healthy;
    std::vector<double> diseased;
    for (std::size_t k = 0; k < profile.iterations(); ++k)
      for (std::size_t i = 0; i < profile.ids.size(); ++i)
        if (profile.in_train[k][i] == membership)
          (profile.labels[i] == Label::Healthy ? healthy : diseased).push_back(profile.distances[k][i]);
    if (healthy.empty() || diseased.empty()) throw DataError("hd_curve: a class has no pooled distances");
    const auto [lo_h, hi_h] = std::minmax_element(healthy.begin(), healthy.end());
    const auto [lo_d, hi_d] = std::minmax_element(diseased.begin(), diseased.end());
    const auto edges = equal_width_edges(std::min(*lo_h, *lo_d), std::max(*hi_h, *hi_d), bins);
    const double h = hellinger(build_histogram(healthy, edges), build_histogram(diseased, edges));
    const auto& acc = membership ? profile.train_accuracy : profile.test_accuracy;
    const double pe = 1.0 - mean_and_std(acc).first / 100.0;
    const double root = std::sqrt(std::max(0.0, 1.0 - pe));
    if (!(root > 0.0)) throw DataError("hd_curve: zero accuracy, fraction undefined");
    if (membership) {
      pt.h_train = h;
      pt.pe_train = pe;
      pt.root_acc_train = root;
      pt.fraction_train = h / root;
    } else {
      pt.h_test = h;
      pt.pe_test = pe;
      pt.root_acc_test = root;
      pt.fraction_test = h / root;
    }
  }
  return pt;
}

HdCurve hd_curve(const Dataset& data, const SvmConfig& cfg, std::span<const double> ratios,
                 std::size_t iterations, std::uint64_t base_seed, std::size_t bins, unsigned threads) {
  if (ratios.empty()) throw InvalidArgument("hd_curve: no split ratios");
  HdCurve curve;
  for (double r : ratios) {
    const SplitSpec split{r, iterations, base_seed};
    curve.points.push_back(hd_point(distance_profile(data, cfg, split, threads), bins));
  }
  return curve;
}

ChernoffCheck chernoff_check(double hellinger_distance, double error_rate) {
  if (!(hellinger_distance >= 0.0 && hellinger_distance <= 1.0))
    throw InvalidArgument("chernoff_check: H must lie in [0, 1]");
  if (!(error_rate >= 0.0 && error_rate <= 1.0)) throw InvalidArgument("chernoff_check: Pe must lie in [0, 1)");
  if (error_rate == 1.0) throw InvalidArgument("chernoff_check: Pe = 1 leaves no root accuracy");
  ChernoffCheck c;
  c.margin = std::sqrt(1.0 - error_rate) - hellinger_distance;
  c.holds = c.margin > 0.0;
  return c;
}

ChernoffReport chernoff_report(const HdCurve& curve) {
  ChernoffReport r;
  for (const auto& p : curve.points) {
    for (const bool train : {true, false}) {
      ChernoffEntry e;
      e.train_fraction = p.train_fraction;
      e.membership = train ? "train" : "test";
      e.h = train ? p.h_train : p.h_test;
      e.pe = train ? p.pe_train : p.pe_test;
      e.check = chernoff_check(e.h, e.pe);
      if (!e.check.holds) ++r.violations;
      r.entries.push_back(std::move(e));
    }
  }
  return r;
}

std::string_view to_string(Trend trend) {
  switch (trend) {
    case Trend::Improving: return "Improving";
    case Trend::Worsening: return "Worsening";
    case Trend::Stable: break;
  }
  return "Stable";
}

Trajectory trajectory_from_distances(std::vector<double> distances, double epsilon) {
  if (distances.size() < 2) throw InvalidArgument("trajectory: at least 2 visits required");
  if (!(epsilon >= 0.0)) throw InvalidArgument("trajectory: epsilon must be non-negative");
  const auto n = static_cast<double>(distances.size());
  const double t_mean = (n - 1.0) / 2.0;
  double d_mean = 0.0;
  for (double d : distances) d_mean += d;
  d_mean /= n;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 0; t < distances.size(); ++t) {
    const double dt = static_cast<double>(t) - t_mean;
    num += dt * (distances[t] - d_mean);
    den += dt * dt;
  }
  Trajectory tr;
  tr.slope = num / den;
  tr.distances = std::move(distances);
  tr.trend = tr.slope > epsilon ? Trend::Improving : tr.slope < -epsilon ? Trend::Worsening : Trend::Stable;
  return tr;
}

Trajectory monitor_trajectory(const SvmModel& model, std::span<const std::vector<double>> visits,
                              double epsilon) {
  if (visits.size() < 2) throw InvalidArgument("trajectory: at least 2 visits required");
  const double norm = rkhs_weight_norm(model);
  std::vector<double> d;
  d.reserve(visits.size());
  for (const auto& v : visits) d.push_back(signed_distance(model, v, norm));
  return trajectory_from_distances(std::move(d), epsilon);
}

std::string profile_csv(const DistanceProfile& p) {
  std::string out = "sample_id,class,disease,mean_dist,std_dist\n";
  for (std::size_t i = 0; i < p.ids.size(); ++i)
    out += p.ids[i] + "," + (p.labels[i] == Label::Diseased ? "1" : "-1") + "," +
           std::string(to_string(p.diseases[i])) + "," + format_double(p.mean[i]) + "," +
           format_double(p.std[i]) + "\n";
  return out;
}

std::string hd_curve_csv(const HdCurve& curve) {
  std::string out =
      "split,train_fraction,h_train,h_test,root_acc_train,root_acc_test,fraction_train,fraction_test\n";
  for (const auto& p : curve.points)
    out += split_label(p.train_fraction) + "," + format_double(p.train_fraction) + "," +
           format_double(p.h_train) + "," + format_double(p.h_test) + "," + format_double(p.root_acc_train) +
           "," + format_double(p.root_acc_test) + "," + format_double(p.fraction_train) + "," +
           format_double(p.fraction_test) + "\n";
  return out;
}

nlohmann::json hd_curve_json(const HdCurve& curve) {
  auto arr = nlohmann::json::array();
  for (const auto& p : curve.points)
    arr.push_back({{"split", split_label(p.train_fraction)},
                   {"train_fraction", p.train_fraction},
                   {"h_train", p.h_train},
                   {"h_test", p.h_test},
                   {"pe_train", p.pe_train},
                   {"pe_test", p.pe_test},
                   {"root_acc_train", p.root_acc_train},
                   {"root_acc_test", p.root_acc_test},
                   {"fraction_train", p.fraction_train},
                   {"fraction_test", p.fraction_test}});
  return {{"points", arr}};
}

nlohmann::json chernoff_json(const ChernoffReport& report) {
  auto arr = nlohmann::json::array();
  for (const auto& e : report.entries)
    arr.push_back({{"split", split_label(e.train_fraction)},
                   {"membership", e.membership},
                   {"h", e.h},
                   {"pe", e.pe},
                   {"root_accuracy", std::sqrt(1.0 - e.pe)},
                   {"margin", e.check.margin},
                   {"holds", e.check.holds}});
  return {{"entries", arr}, {"violations", report.violations}};
}

}  // namespace faf
