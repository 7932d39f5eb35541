#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fafscreen/error.hpp"
#include "fafscreen/grid.hpp"

namespace faf {

enum class Label : int { Healthy = -1, Diseased = +1 };
enum class Disease { STGD, CNVM, CSCR, NONE };

constexpr double sign_of(Label label) noexcept { return label == Label::Diseased ? 1.0 : -1.0; }
std::string_view to_string(Disease disease);
std::optional<Disease> parse_disease(std::string_view text);

struct LabeledSample {
  std::string id;
  std::vector<double> features;
  Label label = Label::Healthy;
  Disease disease = Disease::NONE;
};

std::vector<double> to_vector(const FeatureVector& fv);

struct ClassCounts {
  std::size_t diseased = 0;
  std::size_t healthy = 0;
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct Dataset {
  std::vector<LabeledSample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::size_t dimension() const;
  ClassCounts class_counts() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Healthy samples plus those tagged `disease`; order preserved.
  Dataset reduced_to(Disease disease) const;
  /// Checks the label/disease pairing, equal dimensions and finiteness.
  void validate() const;
};

enum class KernelKind { Linear, Rbf };

struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  /// RBF width: K(x, z) = exp(-|x - z|^2 / (2 sf^2)).
  double scale_factor = 1.0;

  static KernelSpec linear() { return {KernelKind::Linear, 1.0}; }
  static KernelSpec rbf(double sf) { return {KernelKind::Rbf, sf}; }
  void validate() const;
};

std::string_view to_string(KernelKind kind);
std::optional<KernelKind> parse_kernel_kind(std::string_view text);

struct SvmConfig {
  KernelSpec kernel;
  double C = 1.0;
  double kkt_tolerance = 1e-3;
  /// Budget of two-variable updates, in multiples of the training-set size.
  int max_passes = 2000;
  bool standardize = true;

  void validate() const;
};

/// Per-feature z-score parameters fitted on training data.
struct Standardization {
  std::vector<double> means;
  std::vector<double> stds;

  std::vector<double> apply(std::span<const double> x) const;
  friend bool operator==(const Standardization&, const Standardization&) = default;
};

struct SvmModel {
  KernelSpec kernel;
  double C = 1.0;
  double kkt_tolerance = 1e-3;
  /// In standardized space when `standardization` is set.
  std::vector<std::vector<double>> support_vectors;
  /// alpha_i * y_i for each support vector.
  std::vector<double> dual_coefs;
  double bias = 0.0;
  std::optional<Standardization> standardization;
  ClassCounts training_class_counts;

  std::size_t dimension() const;
};

/// Raised when the solver exhausts its budget without meeting the KKT
/// postcondition. Carries the best model found so far.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, SvmModel best)
      : Error(what), best_(std::make_shared<SvmModel>(std::move(best))) {}
  const char* kind() const noexcept override { return "ConvergenceError"; }
  const SvmModel& best_model() const noexcept { return *best_; }

 private:
  std::shared_ptr<const SvmModel> best_;
};

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> z);

/// Per-feature training mean and population std; zero stds become 1.
Standardization standardize_fit(const Dataset& data);

struct TrainResult {
  SvmModel model;
  /// Multiplier per training sample, in dataset order.
  std::vector<double> alphas;
  double dual_objective = 0.0;
  std::size_t iterations = 0;
};

/// Soft-margin dual solved by SMO with second-order working-set selection.
/// The returned multipliers satisfy the KKT conditions within
/// cfg.kkt_tolerance, checked against freshly recomputed decision values.
/// The solver is deterministic; `seed` does not alter the result.
TrainResult train_detailed(const Dataset& data, const SvmConfig& cfg, std::uint64_t seed = 0);
SvmModel train(const Dataset& data, const SvmConfig& cfg, std::uint64_t seed = 0);

/// f(x) = sum_i coef_i K(sv_i, x) + b; standardization is applied here.
double decision_value(const SvmModel& model, std::span<const double> x);
/// sign(f); f == 0 maps to Diseased.
Label classify(const SvmModel& model, std::span<const double> x);
/// |w| in the kernel-induced space. Throws DataError when it is zero.
double rkhs_weight_norm(const SvmModel& model);
/// -f(x) / |w|: positive on the healthy side.
double signed_distance(const SvmModel& model, std::span<const double> x);
double signed_distance(const SvmModel& model, std::span<const double> x, double weight_norm);
/// Explicit primal weights for a linear model (standardized space).
std::vector<double> linear_weights(const SvmModel& model);

/// sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij over a row-major Gram.
double dual_objective(std::span<const double> alphas, std::span<const double> labels,
                      std::span<const double> gram);

inline constexpr int kModelFormatVersion = 1;

std::string save_model(const SvmModel& model);
/// Throws DataError on version mismatch, schema violations or non-finite values.
SvmModel load_model(std::string_view document);

}  // namespace faf
