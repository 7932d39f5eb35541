#include "fafscreen/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fafscreen/text_format.hpp"

namespace faf {

std::string_view to_string(Disease disease) {
  switch (disease) {
    case Disease::STGD: return "STGD";
    case Disease::CNVM: return "CNVM";
    case Disease::CSCR: return "CSCR";
    case Disease::NONE: break;
  }
  return "NONE";
}

std::optional<Disease> parse_disease(std::string_view text) {
  if (text == "STGD") return Disease::STGD;
  if (text == "CNVM") return Disease::CNVM;
  if (text == "CSCR") return Disease::CSCR;
  if (text == "NONE") return Disease::NONE;
  return std::nullopt;
}

std::string_view to_string(KernelKind kind) { return kind == KernelKind::Linear ? "linear" : "rbf"; }

std::optional<KernelKind> parse_kernel_kind(std::string_view text) {
  if (text == "linear") return KernelKind::Linear;
  if (text == "rbf") return KernelKind::Rbf;
  return std::nullopt;
}

std::vector<double> to_vector(const FeatureVector& fv) {
  return {fv.values.begin(), fv.values.end()};
}

// ---------------------------------------------------------------- Dataset

std::size_t Dataset::dimension() const { return samples.empty() ? 0 : samples.front().features.size(); }

ClassCounts Dataset::class_counts() const {
  ClassCounts c;
  for (const auto& s : samples) (s.label == Label::Diseased ? c.diseased : c.healthy)++;
  return c;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.samples.reserve(indices.size());
  for (auto i : indices) out.samples.push_back(samples.at(i));
  return out;
}

Dataset Dataset::reduced_to(Disease disease) const {
  Dataset out;
  for (const auto& s : samples)
    if (s.label == Label::Healthy || s.disease == disease) out.samples.push_back(s);
  return out;
}

void Dataset::validate() const {
  const std::size_t dim = dimension();
  for (const auto& s : samples) {
    if ((s.label == Label::Healthy) != (s.disease == Disease::NONE))
      throw DataError("sample '" + s.id + "': label -1 requires disease NONE and vice versa");
    if (s.features.size() != dim) throw DataError("sample '" + s.id + "': feature dimension mismatch");
    if (std::any_of(s.features.begin(), s.features.end(), [](double v) { return !std::isfinite(v); }))
      throw DataError("sample '" + s.id + "': non-finite feature");
  }
}

// ---------------------------------------------------------------- config

void KernelSpec::validate() const {
  if (kind == KernelKind::Rbf && !(scale_factor > 0.0 && std::isfinite(scale_factor)))
    throw InvalidArgument("RBF scale factor must be positive");
}

void SvmConfig::validate() const {
  kernel.validate();
  if (!(C > 0.0) || !std::isfinite(C)) throw InvalidArgument("box constraint C must be positive");
  if (!(kkt_tolerance > 0.0)) throw InvalidArgument("KKT tolerance must be positive");
  if (max_passes <= 0) throw InvalidArgument("max_passes must be positive");
}

std::size_t SvmModel::dimension() const {
  return support_vectors.empty() ? 0 : support_vectors.front().size();
}

std::vector<double> Standardization::apply(std::span<const double> x) const {
  std::vector<double> z(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) z[k] = (x[k] - means[k]) / stds[k];
  return z;
}

// ---------------------------------------------------------------- kernels

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> z) {
  if (x.size() != z.size()) throw InvalidArgument("kernel: dimension mismatch");
  if (spec.kind == KernelKind::Linear) {
    double dot = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) dot += x[k] * z[k];
    return dot;
  }
  double d2 = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - z[k];
    d2 += d * d;
  }
  return std::exp(-d2 / (2.0 * spec.scale_factor * spec.scale_factor));
}

Standardization standardize_fit(const Dataset& data) {
  if (data.empty()) throw InvalidArgument("standardize_fit: empty dataset");
  const std::size_t dim = data.dimension();
  const auto n = static_cast<double>(data.size());
  Standardization st{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (const auto& s : data.samples)
    for (std::size_t k = 0; k < dim; ++k) st.means[k] += s.features[k];
  for (auto& m : st.means) m /= n;
  for (const auto& s : data.samples)
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = s.features[k] - st.means[k];
      st.stds[k] += d * d;
    }
  for (auto& sd : st.stds) {
    sd = std::sqrt(sd / n);
    if (sd == 0.0) sd = 1.0;
  }
  return st;
}

double dual_objective(std::span<const double> alphas, std::span<const double> labels,
                      std::span<const double> gram) {
  const std::size_t n = alphas.size();
  double linear = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    linear += alphas[i];
    if (alphas[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j)
      quad += alphas[i] * alphas[j] * labels[i] * labels[j] * gram[i * n + j];
  }
  return linear - 0.5 * quad;
}

// ---------------------------------------------------------------- SMO

namespace {

struct SmoOutcome {
  std::vector<double> alpha;
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Minimizes 1/2 a'Qa - e'a subject to 0 <= a <= C, y'a = 0, where
/// Q_ij = y_i y_j K_ij. With v_t = -y_t grad_t the optimality gap is
/// max_{I_up} v - min_{I_low} v; stopping below eps guarantees every KKT
/// condition holds within eps for any bias in that interval.
SmoOutcome solve_smo(const std::vector<double>& K, const std::vector<double>& y, double C,
                     double eps, std::size_t max_iterations) {
  constexpr double kTau = 1e-12;
  const std::size_t n = y.size();
  SmoOutcome out;
  out.alpha.assign(n, 0.0);
  auto& a = out.alpha;
  std::vector<double> grad(n, -1.0);

  const auto in_up = [&](std::size_t t) { return y[t] > 0 ? a[t] < C : a[t] > 0; };
  const auto in_low = [&](std::size_t t) { return y[t] > 0 ? a[t] > 0 : a[t] < C; };

  while (true) {
    std::size_t i = n;
    double vmax = -std::numeric_limits<double>::infinity();
    double vmin = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > vmax) {
        vmax = v;
        i = t;
      }
      if (in_low(t) && v < vmin) vmin = v;
    }
    if (i == n || vmax - vmin < eps) {
      out.converged = true;
      break;
    }
    if (out.iterations >= max_iterations) break;

    std::size_t j = n;
    double best = std::numeric_limits<double>::infinity();
    double curvature_ij = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double gap = vmax + y[t] * grad[t];
      if (gap <= 0) continue;
      double curv = K[i * n + i] + K[t * n + t] - 2.0 * K[i * n + t];
      if (curv <= 0) curv = kTau;
      const double score = -(gap * gap) / curv;
      if (score < best) {
        best = score;
        j = t;
        curvature_ij = curv;
      }
    }
    if (j == n) {
      out.converged = true;
      break;
    }

    // Move along d_i = y_i, d_j = -y_j, which keeps y'a fixed.
    const double step_free = (vmax - (-y[j] * grad[j])) / curvature_ij;
    const double limit_i = y[i] > 0 ? C - a[i] : a[i];
    const double limit_j = y[j] > 0 ? a[j] : C - a[j];
    double step = std::min({step_free, limit_i, limit_j});
    const double old_i = a[i];
    const double old_j = a[j];
    if (step == limit_i)
      a[i] = y[i] > 0 ? C : 0.0;
    else
      a[i] = old_i + y[i] * step;
    if (step == limit_j)
      a[j] = y[j] > 0 ? 0.0 : C;
    else
      a[j] = old_j - y[j] * step;
    a[i] = std::clamp(a[i], 0.0, C);
    a[j] = std::clamp(a[j], 0.0, C);

    const double di = a[i] - old_i;
    const double dj = a[j] - old_j;
    for (std::size_t t = 0; t < n; ++t)
      grad[t] += y[t] * (y[i] * K[t * n + i] * di + y[j] * K[t * n + j] * dj);
    ++out.iterations;
  }
  return out;
}

/// Bias from freshly recomputed margins: mean of y_i - g_i over free
/// multipliers, else the midpoint of the KKT-feasible interval.
double compute_bias(const std::vector<double>& K, const std::vector<double>& y,
                    const std::vector<double>& a, double C, std::vector<double>& g) {
  const std::size_t n = y.size();
  g.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t s = 0; s < n; ++s)
      if (a[s] != 0.0) g[t] += a[s] * y[s] * K[t * n + s];

  double free_sum = 0.0;
  std::size_t free_count = 0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    const double v = y[t] - g[t];
    if (a[t] > 0 && a[t] < C) {
      free_sum += v;
      ++free_count;
    } else if ((a[t] == 0) == (y[t] > 0)) {
      lower = std::max(lower, v);  // a=0,y=+1 or a=C,y=-1: b >= v
    } else {
      upper = std::min(upper, v);
    }
  }
  if (free_count > 0) return free_sum / static_cast<double>(free_count);
  if (std::isinf(lower)) return upper;
  if (std::isinf(upper)) return lower;
  return 0.5 * (lower + upper);
}

bool kkt_satisfied(const std::vector<double>& y, const std::vector<double>& a,
                   const std::vector<double>& g, double b, double C, double tol) {
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double margin = y[t] * (g[t] + b);
    if (a[t] == 0.0) {
      if (margin < 1.0 - tol) return false;
    } else if (a[t] == C) {
      if (margin > 1.0 + tol) return false;
    } else if (std::fabs(margin - 1.0) > tol) {
      return false;
    }
  }
  return true;
}

}  // namespace

TrainResult train_detailed(const Dataset& data, const SvmConfig& cfg, std::uint64_t /*seed*/) {
  cfg.validate();
  if (data.empty()) throw InvalidArgument("train: empty dataset");
  data.validate();
  const auto counts = data.class_counts();
  if (counts.diseased == 0 || counts.healthy == 0)
    throw InvalidArgument("train: dataset must contain both classes");
  if (data.dimension() == 0) throw InvalidArgument("train: zero-dimensional features");

  const std::size_t n = data.size();
  std::optional<Standardization> st;
  if (cfg.standardize) st = standardize_fit(data);
  std::vector<std::vector<double>> x;
  x.reserve(n);
  std::vector<double> y(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& s = data.samples[t];
    x.push_back(st ? st->apply(s.features) : s.features);
    y[t] = sign_of(s.label);
  }

  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) K[i * n + j] = K[j * n + i] = kernel_eval(cfg.kernel, x[i], x[j]);

  const auto budget = static_cast<std::size_t>(cfg.max_passes) * n;
  auto smo = solve_smo(K, y, cfg.C, 0.5 * cfg.kkt_tolerance, budget);
  std::vector<double> g;
  const double bias = compute_bias(K, y, smo.alpha, cfg.C, g);

  TrainResult result;
  auto& model = result.model;
  model.kernel = cfg.kernel;
  model.C = cfg.C;
  model.kkt_tolerance = cfg.kkt_tolerance;
  model.bias = bias;
  model.standardization = std::move(st);
  model.training_class_counts = counts;
  for (std::size_t t = 0; t < n; ++t) {
    if (smo.alpha[t] == 0.0) continue;
    model.support_vectors.push_back(x[t]);
    model.dual_coefs.push_back(smo.alpha[t] * y[t]);
  }
  result.alphas = smo.alpha;
  result.iterations = smo.iterations;
  result.dual_objective = dual_objective(smo.alpha, y, K);

  if (!smo.converged || !kkt_satisfied(y, smo.alpha, g, bias, cfg.C, cfg.kkt_tolerance))
    throw ConvergenceError("SMO did not satisfy KKT conditions within " + std::to_string(budget) +
                               " updates",
                           model);
  return result;
}

SvmModel train(const Dataset& data, const SvmConfig& cfg, std::uint64_t seed) {
  return train_detailed(data, cfg, seed).model;
}

// ---------------------------------------------------------------- inference

double decision_value(const SvmModel& model, std::span<const double> x) {
  if (x.size() != model.dimension())
    throw InvalidArgument("decision_value: expected " + std::to_string(model.dimension()) +
                          " features, got " + std::to_string(x.size()));
  std::vector<double> z;
  std::span<const double> input = x;
  if (model.standardization) {
    z = model.standardization->apply(x);
    input = z;
  }
  double f = 0.0;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
    f += model.dual_coefs[i] * kernel_eval(model.kernel, model.support_vectors[i], input);
  return f + model.bias;
}

Label classify(const SvmModel& model, std::span<const double> x) {
  return decision_value(model, x) >= 0.0 ? Label::Diseased : Label::Healthy;
}

double rkhs_weight_norm(const SvmModel& model) {
  const std::size_t m = model.support_vectors.size();
  double sq = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      sq += model.dual_coefs[i] * model.dual_coefs[j] *
            kernel_eval(model.kernel, model.support_vectors[i], model.support_vectors[j]);
  if (!(sq > 0.0)) throw DataError("degenerate model: zero weight norm, no decision boundary");
  return std::sqrt(sq);
}

double signed_distance(const SvmModel& model, std::span<const double> x, double weight_norm) {
  return -decision_value(model, x) / weight_norm;
}

double signed_distance(const SvmModel& model, std::span<const double> x) {
  return signed_distance(model, x, rkhs_weight_norm(model));
}

std::vector<double> linear_weights(const SvmModel& model) {
  if (model.kernel.kind != KernelKind::Linear) throw InvalidArgument("linear_weights: model is not linear");
  std::vector<double> w(model.dimension(), 0.0);
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += model.dual_coefs[i] * model.support_vectors[i][k];
  return w;
}

// ---------------------------------------------------------------- persistence

std::string save_model(const SvmModel& model) {
  using nlohmann::json;
  json doc;
  doc["version"] = kModelFormatVersion;
  doc["kernel"] = std::string(to_string(model.kernel.kind));
  doc["scale_factor"] = model.kernel.scale_factor;
  doc["scale_factor_mapping"] = "sigma: K(x,z) = exp(-|x-z|^2 / (2 * scale_factor^2))";
  doc["C"] = model.C;
  doc["kkt_tolerance"] = model.kkt_tolerance;
  if (model.standardization) {
    doc["standardize_means"] = model.standardization->means;
    doc["standardize_stds"] = model.standardization->stds;
  } else {
    doc["standardize_means"] = nullptr;
    doc["standardize_stds"] = nullptr;
  }
  doc["support_vectors"] = model.support_vectors;
  doc["dual_coefs"] = model.dual_coefs;
  doc["bias"] = model.bias;
  doc["class_counts"] = {{"diseased", model.training_class_counts.diseased},
                         {"healthy", model.training_class_counts.healthy}};
  return dump_json(doc, 1) + "\n";
}

namespace {

double finite_number(const nlohmann::json& v, const char* field) {
  if (!v.is_number()) throw DataError(std::string("model schema: '") + field + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw DataError(std::string("model schema: '") + field + "' is not finite");
  return d;
}

std::vector<double> number_array(const nlohmann::json& v, const char* field) {
  if (!v.is_array()) throw DataError(std::string("model schema: '") + field + "' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& item : v) out.push_back(finite_number(item, field));
  return out;
}

const nlohmann::json& require(const nlohmann::json& doc, const char* field) {
  const auto it = doc.find(field);
  if (it == doc.end()) throw DataError(std::string("model schema: missing field '") + field + "'");
  return *it;
}

}  // namespace

SvmModel load_model(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model schema: not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DataError("model schema: document must be an object");
  const auto& version = require(doc, "version");
  if (!version.is_number_integer() || version.get<int>() != kModelFormatVersion)
    throw DataError("model version mismatch: expected " + std::to_string(kModelFormatVersion));

  SvmModel model;
  const auto& kernel = require(doc, "kernel");
  const auto kind = kernel.is_string() ? parse_kernel_kind(kernel.get<std::string>()) : std::nullopt;
  if (!kind) throw DataError("model schema: unknown kernel");
  model.kernel.kind = *kind;
  model.kernel.scale_factor = finite_number(require(doc, "scale_factor"), "scale_factor");
  model.C = finite_number(require(doc, "C"), "C");
  model.kkt_tolerance = finite_number(require(doc, "kkt_tolerance"), "kkt_tolerance");
  model.bias = finite_number(require(doc, "bias"), "bias");
  try {
    model.kernel.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("model schema: ") + e.what());
  }
  if (!(model.C > 0) || !(model.kkt_tolerance > 0)) throw DataError("model schema: C and tolerance must be positive");

  const auto& means = require(doc, "standardize_means");
  const auto& stds = require(doc, "standardize_stds");
  if (means.is_null() != stds.is_null()) throw DataError("model schema: standardization fields must both be set or null");
  if (!means.is_null()) {
    Standardization st{number_array(means, "standardize_means"), number_array(stds, "standardize_stds")};
    if (st.means.size() != st.stds.size()) throw DataError("model schema: standardization length mismatch");
    if (std::any_of(st.stds.begin(), st.stds.end(), [](double s) { return !(s > 0); }))
      throw DataError("model schema: standardization stds must be positive");
    model.standardization = std::move(st);
  }

  const auto& svs = require(doc, "support_vectors");
  if (!svs.is_array() || svs.empty()) throw DataError("model schema: support_vectors must be a non-empty array");
  for (const auto& sv : svs) model.support_vectors.push_back(number_array(sv, "support_vectors"));
  model.dual_coefs = number_array(require(doc, "dual_coefs"), "dual_coefs");
  if (model.dual_coefs.size() != model.support_vectors.size())
    throw DataError("model schema: support_vectors and dual_coefs differ in length");
  const std::size_t dim = model.support_vectors.front().size();
  if (dim == 0) throw DataError("model schema: zero-dimensional support vectors");
  for (const auto& sv : model.support_vectors)
    if (sv.size() != dim) throw DataError("model schema: ragged support_vectors");
  if (model.standardization && model.standardization->means.size() != dim)
    throw DataError("model schema: standardization dimension mismatch");
  for (double c : model.dual_coefs)
    if (std::fabs(c) > model.C) throw DataError("model schema: |dual_coef| exceeds C");
  const double balance = std::accumulate(model.dual_coefs.begin(), model.dual_coefs.end(), 0.0);
  if (std::fabs(balance) > 10.0 * model.kkt_tolerance)
    throw DataError("model schema: dual coefficients do not sum to zero");

  const auto& counts = require(doc, "class_counts");
  if (!counts.is_object() || !counts.contains("diseased") || !counts.contains("healthy") ||
      !counts["diseased"].is_number_unsigned() || !counts["healthy"].is_number_unsigned())
    throw DataError("model schema: class_counts must hold non-negative integers");
  model.training_class_counts = {counts["diseased"].get<std::size_t>(), counts["healthy"].get<std::size_t>()};
  return model;
}

}  // namespace faf
