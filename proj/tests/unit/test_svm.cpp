#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "fafscreen/rng.hpp"
#include "fafscreen/svm.hpp"
#include "oracles.hpp"

using namespace faf;

namespace {

LabeledSample sample(std::string id, std::vector<double> x, Label label) {
  return {std::move(id), std::move(x), label, label == Label::Diseased ? Disease::STGD : Disease::NONE};
}

Dataset two_point() {
  return Dataset{{sample("a", {-1, -1}, Label::Healthy), sample("b", {1, 1}, Label::Diseased)}};
}

SvmConfig linear_cfg(double C) {
  SvmConfig cfg;
  cfg.kernel = KernelSpec::linear();
  cfg.C = C;
  cfg.standardize = false;
  return cfg;
}

TrainResult audited(const Dataset& d, const SvmConfig& cfg) {
  auto r = train_detailed(d, cfg);
  const auto audit = oracle::kkt_audit(d, r);
  INFO(audit);
  CHECK(audit.empty());
  return r;
}

}  // namespace

TEST_SUITE("svm") {
  TEST_CASE("kernels") {
    const std::vector<double> a{1, 2}, b{3, 4}, z{0, 0}, o{1, 1};
    CHECK(kernel_eval(KernelSpec::linear(), a, b) == 11.0);
    CHECK(kernel_eval(KernelSpec::rbf(2.75), a, a) == 1.0);
    CHECK(kernel_eval(KernelSpec::rbf(1.0), z, o) == doctest::Approx(0.367879441171).epsilon(1e-12));
    CHECK_THROWS_AS(KernelSpec::rbf(0.0).validate(), InvalidArgument);
    CHECK(parse_kernel_kind("rbf") == KernelKind::Rbf);
    CHECK_FALSE(parse_kernel_kind("poly").has_value());
  }

  TEST_CASE("standardization") {
    Dataset one{{sample("a", {3, 4}, Label::Healthy)}};
    auto st = standardize_fit(one);
    CHECK(st.means == std::vector<double>{3, 4});
    CHECK(st.stds == std::vector<double>{1, 1});
    Dataset two{{sample("a", {0, 5}, Label::Healthy), sample("b", {2, 5}, Label::Diseased)}};
    st = standardize_fit(two);
    CHECK(st.means == std::vector<double>{1, 5});
    CHECK(st.stds == std::vector<double>{1, 1});
    CHECK(st.apply(std::vector<double>{2, 5}) == std::vector<double>{1, 0});
  }

  TEST_CASE("analytic two-point solution") {
    const auto r = audited(two_point(), linear_cfg(10));
    CHECK(r.alphas[0] == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(r.alphas[1] == doctest::Approx(0.25).epsilon(1e-9));
    const auto w = linear_weights(r.model);
    CHECK(std::fabs(w[0] - 0.5) < 1e-6);
    CHECK(std::fabs(w[1] - 0.5) < 1e-6);
    CHECK(std::fabs(r.model.bias) < 1e-6);
    CHECK(std::fabs(rkhs_weight_norm(r.model) - std::sqrt(0.5)) < 1e-6);
    const std::vector<double> pos{1, 1}, neg{-1, -1}, mid{0, 0};
    CHECK(std::fabs(decision_value(r.model, pos) - 1.0) < 1e-6);
    CHECK(std::fabs(decision_value(r.model, neg) + 1.0) < 1e-6);
    CHECK(std::fabs(decision_value(r.model, mid)) < 1e-6);
    CHECK(std::fabs(signed_distance(r.model, pos) + std::sqrt(2.0)) < 1e-6);
    CHECK(std::fabs(signed_distance(r.model, neg) - std::sqrt(2.0)) < 1e-6);
    CHECK(classify(r.model, pos) == Label::Diseased);
    CHECK(classify(r.model, neg) == Label::Healthy);
  }

  TEST_CASE("zero decision value classifies as diseased") {
    SvmModel m;
    m.kernel = KernelSpec::linear();
    m.support_vectors = {{1.0}};
    m.dual_coefs = {0.0};
    m.bias = 0.0;
    CHECK(classify(m, std::vector<double>{5.0}) == Label::Diseased);
    m.bias = -1.0;
    CHECK(classify(m, std::vector<double>{5.0}) == Label::Healthy);
    CHECK_THROWS_AS(rkhs_weight_norm(m), DataError);
  }

  TEST_CASE("xor with rbf") {
    Dataset d{{sample("a", {0, 0}, Label::Diseased), sample("b", {1, 1}, Label::Diseased),
               sample("c", {0, 1}, Label::Healthy), sample("d", {1, 0}, Label::Healthy)}};
    SvmConfig cfg;
    cfg.kernel = KernelSpec::rbf(1.0);
    cfg.C = 100;
    cfg.standardize = false;
    const auto r = audited(d, cfg);
    for (const auto& s : d.samples) CHECK(classify(r.model, s.features) == s.label);
  }

  TEST_CASE("input errors") {
    Dataset one_class{{sample("a", {1}, Label::Diseased), sample("b", {2}, Label::Diseased)}};
    CHECK_THROWS_AS(train(one_class, linear_cfg(1)), InvalidArgument);
    CHECK_THROWS_AS(train(Dataset{}, linear_cfg(1)), InvalidArgument);
    Dataset ragged{{sample("a", {1}, Label::Diseased), sample("b", {2, 3}, Label::Healthy)}};
    CHECK_THROWS_AS(train(ragged, linear_cfg(1)), DataError);
    Dataset bad_pair{{sample("a", {1}, Label::Diseased), sample("b", {2}, Label::Healthy)}};
    bad_pair.samples[1].disease = Disease::CNVM;
    CHECK_THROWS_AS(bad_pair.validate(), DataError);
    CHECK_THROWS_AS(train(two_point(), linear_cfg(0)), InvalidArgument);
    const auto m = train(two_point(), linear_cfg(1));
    CHECK_THROWS_AS(decision_value(m, std::vector<double>{1.0}), InvalidArgument);
  }

  TEST_CASE("tiny budget raises ConvergenceError with the best model") {
    CounterRng rng(2);
    const auto d = oracle::random_dataset(rng, 40, 3, 1.0);
    SvmConfig cfg;
    cfg.kernel = KernelSpec::rbf(0.3);
    cfg.C = 1000;
    cfg.max_passes = 1;
    try {
      train(d, cfg);
      FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
      CHECK(std::string(e.kind()) == "ConvergenceError");
      CHECK(e.best_model().dimension() == 3);
    }
  }

  TEST_CASE("seed does not change the solution") {
    CounterRng rng(8);
    const auto d = oracle::random_dataset(rng, 20, 2);
    SvmConfig cfg;
    const auto a = train_detailed(d, cfg, 1);
    const auto b = train_detailed(d, cfg, 99);
    CHECK(a.alphas == b.alphas);
    CHECK(a.model.bias == b.model.bias);
  }

  TEST_CASE("matches the projected-gradient oracle") {
    CounterRng rng(31);
    for (int t = 0; t < 30; ++t) {
      const std::size_t n = 2 + rng.below(7);
      const std::size_t dim = 1 + rng.below(3);
      const auto d = oracle::random_dataset(rng, n, dim);
      const double C = std::array<double, 3>{0.5, 1, 10}[rng.below(3)];
      SvmConfig cfg;
      cfg.kernel = t % 2 == 0 ? KernelSpec::linear() : KernelSpec::rbf(rng.uniform(0.5, 2.0));
      cfg.C = C;
      cfg.kkt_tolerance = 1e-6;
      cfg.standardize = false;
      const auto r = audited(d, cfg);
      std::vector<std::vector<double>> x;
      std::vector<double> y;
      for (const auto& s : d.samples) {
        x.push_back(s.features);
        y.push_back(sign_of(s.label));
      }
      const auto o = oracle::projected_gradient_dual(x, y, cfg.kernel, C);
      CHECK(std::fabs(r.dual_objective - o.objective) <= 1e-4);
    }
  }

  TEST_CASE("duplicated dataset keeps the weight norm") {
    CounterRng rng(41);
    for (int t = 0; t < 5; ++t) {
      auto d = oracle::random_dataset(rng, 6, 2, 3.0);
      auto cfg = linear_cfg(1e6);  // hard margin keeps the primal unchanged under duplication
      cfg.kkt_tolerance = 1e-7;
      // Separable by construction.
      for (auto& s : d.samples) s.features[0] = (s.label == Label::Diseased ? 2.0 : -2.0) + 0.3 * s.features[0];
      const auto a = audited(d, cfg);
      Dataset twice = d;
      for (auto s : d.samples) {
        s.id += "_dup";
        twice.samples.push_back(s);
      }
      const auto b = audited(twice, cfg);
      CHECK(rkhs_weight_norm(b.model) == doctest::Approx(rkhs_weight_norm(a.model)).epsilon(1e-5));
    }
  }

  TEST_CASE("model document round trip") {
    CounterRng rng(43);
    for (int t = 0; t < 6; ++t) {
      const auto d = oracle::random_dataset(rng, 12, 3);
      SvmConfig cfg;
      cfg.kernel = t % 2 ? KernelSpec::linear() : KernelSpec::rbf(rng.uniform(0.5, 3));
      cfg.standardize = t % 3 != 0;
      const auto r = audited(d, cfg);
      const auto doc = save_model(r.model);
      const auto back = load_model(doc);
      CHECK(save_model(back) == doc);
      for (int k = 0; k < 100; ++k) {
        std::vector<double> x{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        REQUIRE(decision_value(back, x) == decision_value(r.model, x));
      }
    }
  }

  TEST_CASE("model documents are validated") {
    const auto doc = save_model(train(two_point(), linear_cfg(10)));
    CHECK_THROWS_AS(load_model(doc.substr(0, doc.size() / 2)), DataError);
    auto j = nlohmann::json::parse(doc);
    j["version"] = 99;
    CHECK_THROWS_AS(load_model(j.dump()), DataError);
    j = nlohmann::json::parse(doc);
    j["dual_coefs"][0] = 1000.0;
    CHECK_THROWS_AS(load_model(j.dump()), DataError);
    j = nlohmann::json::parse(doc);
    j["support_vectors"][0] = {1.0};
    CHECK_THROWS_AS(load_model(j.dump()), DataError);
    j = nlohmann::json::parse(doc);
    j["kernel"] = "poly";
    CHECK_THROWS_AS(load_model(j.dump()), DataError);
  }
}
