#include "seegnn/error.hpp"
#include "seegnn/gnn_core.hpp"
#include "seegnn/rng.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <numeric>
#include <random>

using namespace seegnn;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::IoFailure;
}

double max_param_diff(const ParamSet& a, const ParamSet& b) {
  std::vector<const Eigen::MatrixXd*> rhs;
  b.for_each([&](const char*, const Eigen::MatrixXd& t) { rhs.push_back(&t); });
  double m = 0;
  std::size_t k = 0;
  a.for_each([&](const char*, const Eigen::MatrixXd& t) { m = std::max(m, (t - *rhs[k++]).cwiseAbs().maxCoeff()); });
  return m;
}

// Independent scalar replay of bias-corrected Adam on f(x) = x^2.
std::vector<double> scalar_adam(double x, double lr, int steps) {
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0, v = 0;
  std::vector<double> out;
  for (int t = 1; t <= steps; ++t) {
    const double g = 2 * x;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    x -= lr * mhat / (std::sqrt(vhat) + eps);
    out.push_back(x);
  }
  return out;
}

}  // namespace

TEST_SUITE("gnn_core") {
  TEST_CASE("normalized adjacency examples") {
    CHECK(normalize_adjacency(Eigen::MatrixXd::Zero(1, 1))(0, 0) == 1.0);
    Eigen::MatrixXd two(2, 2);
    two << 0, 1, 1, 0;
    const Eigen::MatrixXd a = normalize_adjacency(two);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(a(i, j) == doctest::Approx(0.5).epsilon(1e-15));

    Eigen::MatrixXd iso = Eigen::MatrixXd::Zero(3, 3);
    iso(0, 1) = iso(1, 0) = 0.4;
    const Eigen::MatrixXd b = normalize_adjacency(iso);
    CHECK(b(2, 2) == 1.0);
    CHECK(b(2, 0) == 0.0);
    CHECK(b(0, 2) == 0.0);
  }

  TEST_CASE("normalized adjacency is symmetric with entries in [0, 1]") {
    std::mt19937_64 gen(1);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::MatrixXd w = testsupport::random_symmetric(gen, 1 + trial % 9, 0, 1);
      const Eigen::MatrixXd a = normalize_adjacency(w);
      CHECK(a == a.transpose());
      CHECK(a.minCoeff() >= 0.0);
      CHECK(a.maxCoeff() <= 1.0);
      // Oracle: explicit D^{-1/2}(A+I)D^{-1/2}.
      const Eigen::MatrixXd ai = w + Eigen::MatrixXd::Identity(w.rows(), w.cols());
      const Eigen::VectorXd d = ai.rowwise().sum().cwiseSqrt().cwiseInverse();
      const Eigen::MatrixXd expected = d.asDiagonal() * ai * d.asDiagonal();
      CHECK((a - expected).cwiseAbs().maxCoeff() < 1e-15);
    }
  }

  TEST_CASE("normalized adjacency errors") {
    Eigen::MatrixXd w(2, 2);
    w << 0, 0.5, 0.4, 0;
    CHECK(kind_of([&] { normalize_adjacency(w); }) == ErrorKind::NonSymmetric);
    w << 0, -0.5, -0.5, 0;
    CHECK(kind_of([&] { normalize_adjacency(w); }) == ErrorKind::NegativeWeight);
  }

  TEST_CASE("forward on a single node with identity weights") {
    GcnModel m = init_model(3, 2, 1, 3);
    m.params.w1.setIdentity();
    m.params.w2.setIdentity();
    m.params.w_out.setRandom();
    FeatureMatrix x(1, 3);
    x << 0.5, 2.0, 0.0;
    const auto r = forward(m, Eigen::MatrixXd::Ones(1, 1), x);
    CHECK((r.cache.pooled - x.row(0)).norm() == 0.0);
    CHECK((r.logits - x.row(0) * m.params.w_out).norm() < 1e-15);
  }

  TEST_CASE("zero input and zero biases give zero logits") {
    const GcnModel m = init_model(4, 3, 2, 6);
    const auto r = forward(m, normalize_adjacency(Eigen::MatrixXd::Zero(5, 5)), FeatureMatrix::Zero(5, 6));
    CHECK(r.logits.isZero(0.0));
  }

  TEST_CASE("logits are invariant to node relabeling") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 20; ++trial) {
      auto c = testsupport::random_case(100 + static_cast<std::uint64_t>(trial), 5, 8, 4);
      const int n = static_cast<int>(c.x.rows());
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), gen);
      Eigen::MatrixXd pa(n, n);
      FeatureMatrix px(n, c.x.cols());
      for (int i = 0; i < n; ++i) {
        px.row(i) = c.x.row(perm[i]);
        for (int j = 0; j < n; ++j) pa(i, j) = c.a_hat(perm[i], perm[j]);
      }
      const auto a = forward(c.model, c.a_hat, c.x).logits;
      const auto b = forward(c.model, pa, px).logits;
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("forward validation") {
    const GcnModel m = init_model(2, 2, 4, 3);
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
    CHECK(kind_of([&] { forward(m, a, FeatureMatrix::Zero(2, 4)); }) == ErrorKind::ShapeMismatch);
    CHECK(kind_of([&] { forward(m, Eigen::MatrixXd::Identity(3, 3), FeatureMatrix::Zero(2, 3)); }) ==
          ErrorKind::ShapeMismatch);
    FeatureMatrix bad = FeatureMatrix::Zero(2, 3);
    bad(1, 1) = std::nan("");
    CHECK(kind_of([&] { forward(m, a, bad); }) == ErrorKind::NonFiniteInput);
  }

  TEST_CASE("softmax cross entropy") {
    const auto u = softmax_cross_entropy(Eigen::RowVector3d(0.7, 0.7, 0.7), 1);
    CHECK(u.loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));
    const auto big = softmax_cross_entropy(Eigen::RowVector2d(1000, 0), 0);
    CHECK(std::isfinite(big.loss));
    CHECK(big.loss < 1e-12);
    CHECK(kind_of([] { softmax_cross_entropy(Eigen::RowVector2d(0, 0), 2); }) == ErrorKind::LabelOutOfRange);
    CHECK(kind_of([] { softmax_cross_entropy(Eigen::RowVector2d(0, 0), -1); }) == ErrorKind::LabelOutOfRange);

    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> wide(-1e6, 1e6);
    for (int trial = 0; trial < 500; ++trial) {
      Eigen::RowVectorXd logits(2 + trial % 2);
      for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = trial % 3 == 0 ? wide(gen) / 1e5 : wide(gen);
      const auto r = softmax_cross_entropy(logits, trial % static_cast<int>(logits.size()));
      CHECK(std::isfinite(r.loss));
      CHECK(r.dlogits.allFinite());
      CHECK(std::abs(r.dlogits.sum()) < 1e-12);
      CHECK(std::abs(softmax(logits).sum() - 1.0) < 1e-12);
    }
  }

  TEST_CASE("backward identities") {
    auto c = testsupport::random_case(7);
    const auto fwd = forward(c.model, c.a_hat, c.x);
    const auto loss = softmax_cross_entropy(fwd.logits, c.label);
    const auto back = backward(c.model, fwd.cache, loss.dlogits);
    CHECK((back.grads.b_out - loss.dlogits).norm() == 0.0);
    CHECK(back.grads.all_finite());
    const auto zero = backward(c.model, fwd.cache, Eigen::RowVectorXd::Zero(loss.dlogits.size()));
    CHECK(zero.grads.all_zero());
  }

  TEST_CASE("finite-difference gradient check") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto r = testsupport::check_gradients(testsupport::random_case(seed));
      CHECK(r.max_param_error < 1e-4);
      CHECK(r.max_input_error < 1e-4);
    }
    // Wider input with Glorot weights and zero biases.
    auto wide = testsupport::random_case(99, 3, 1, 2);
    wide.model = init_model(2, 2, 99, 40);
    wide.x = FeatureMatrix::Random(wide.x.rows(), 40);
    wide.label = 1;
    CHECK(testsupport::check_gradients(wide).max_param_error < 1e-4);
  }

  TEST_CASE("dropout gradients use the recorded mask") {
    auto c = testsupport::random_case(11, 5, 6, 4);
    Rng rng(3);
    const auto fwd = forward(c.model, c.a_hat, c.x, {0.5, &rng});
    const auto loss = softmax_cross_entropy(fwd.logits, c.label);
    const auto back = backward(c.model, fwd.cache, loss.dlogits);
    const double step = 1e-5;
    GcnModel probe = c.model;
    for (Eigen::Index i = 0; i < probe.params.b1.size(); ++i) {
      const double saved = probe.params.b1(i);
      auto at = [&](double v) {
        probe.params.b1(i) = v;
        Rng same(3);
        return softmax_cross_entropy(forward(probe, c.a_hat, c.x, {0.5, &same}).logits, c.label).loss;
      };
      const double numeric = (at(saved + step) - at(saved - step)) / (2 * step);
      probe.params.b1(i) = saved;
      CHECK(testsupport::relative_error(back.grads.b1(i), numeric) < 1e-4);
    }
  }

  TEST_CASE("stale cache is rejected") {
    auto c = testsupport::random_case(12);
    const auto fwd = forward(c.model, c.a_hat, c.x);
    const auto loss = softmax_cross_entropy(fwd.logits, c.label);
    const auto back = backward(c.model, fwd.cache, loss.dlogits);
    AdamState s = make_adam_state(c.model, 1e-3);
    adam_step(c.model, back.grads, s);
    CHECK(kind_of([&] { backward(c.model, fwd.cache, loss.dlogits); }) == ErrorKind::StaleCache);
  }

  TEST_CASE("adam basics") {
    GcnModel m = init_model(3, 2, 13, 4);
    const GcnModel before = m;
    AdamState s = make_adam_state(m, 1e-2);
    adam_step(m, ParamSet::zeros_like(m.params), s);
    CHECK(max_param_diff(m.params, before.params) == 0.0);
    CHECK(s.t == 1);
    CHECK(s.beta1 == 0.9);
    CHECK(s.beta2 == 0.999);
    CHECK(s.eps == 1e-8);

    GcnModel first = before;
    AdamState fresh = make_adam_state(first, 1e-2);
    Gradients g = ParamSet::zeros_like(first.params);
    std::mt19937_64 gen(14);
    std::normal_distribution<double> d(0, 10);
    g.for_each([&](const char*, Eigen::Ref<Eigen::MatrixXd> t) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = d(gen);
    });
    adam_step(first, g, fresh);
    CHECK(max_param_diff(first.params, before.params) <= 1e-2 * (1 + 1e-9));

    Gradients wrong = ParamSet::zeros_like(init_model(2, 2, 1, 4).params);
    CHECK(kind_of([&] { adam_step(m, wrong, s); }) == ErrorKind::ShapeMismatch);
  }

  TEST_CASE("adam on x^2 matches a scalar replay") {
    GcnModel m = init_model(1, 2, 15, 1);
    m.params.w1(0, 0) = 1.0;
    AdamState s = make_adam_state(m, 0.1);
    const auto oracle = scalar_adam(1.0, 0.1, 200);
    std::vector<double> trace;
    for (int t = 0; t < 200; ++t) {
      Gradients g = ParamSet::zeros_like(m.params);
      g.w1(0, 0) = 2 * m.params.w1(0, 0);
      adam_step(m, g, s);
      trace.push_back(m.params.w1(0, 0));
    }
    for (std::size_t t = 0; t < trace.size(); ++t) CHECK(std::abs(trace[t] - oracle[t]) < 1e-12);
    CHECK(std::abs(trace.back()) < 1e-3);
    auto window_max = [&](std::size_t lo, std::size_t hi) {
      double mx = 0;
      for (std::size_t t = lo; t < hi; ++t) mx = std::max(mx, std::abs(trace[t]));
      return mx;
    };
    CHECK(window_max(150, 200) < window_max(100, 150));
    CHECK(window_max(100, 150) < window_max(50, 100));
    CHECK(window_max(50, 100) < window_max(0, 50));
  }

  TEST_CASE("init is seeded Glorot with zero biases") {
    const GcnModel a = init_model(16, 3, 42);
    const GcnModel b = init_model(16, 3, 42);
    CHECK(max_param_diff(a.params, b.params) == 0.0);
    CHECK(max_param_diff(a.params, init_model(16, 3, 43).params) > 0.0);
    CHECK(a.params.w1.rows() == 5000);
    CHECK(a.params.w1.cols() == 16);
    CHECK(a.params.w_out.cols() == 3);
    CHECK(a.params.w1.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (5000 + 16)));
    CHECK(a.params.w2.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (16 + 16)));
    CHECK(a.params.w_out.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (16 + 3)));
    CHECK(a.params.b1.isZero(0.0));
    CHECK(a.params.b2.isZero(0.0));
    CHECK(a.params.b_out.isZero(0.0));
    CHECK(kind_of([] { init_model(0, 2, 1); }) == ErrorKind::InvalidDims);
    CHECK(kind_of([] { init_model(8, 4, 1); }) == ErrorKind::InvalidDims);
  }

  TEST_CASE("checkpoint round trip and corruption") {
    testsupport::TempDir dir;
    auto c = testsupport::random_case(16, 4, 8, 4);
    AdamState s = make_adam_state(c.model, 3e-3);
    const auto fwd = forward(c.model, c.a_hat, c.x);
    adam_step(c.model, backward(c.model, fwd.cache, softmax_cross_entropy(fwd.logits, c.label).dlogits).grads, s);
    Checkpoint ck{c.model, s, {{"scheme", "binary"}}};
    save_checkpoint(ck, dir / "ck.json");
    const Checkpoint back = load_checkpoint(dir / "ck.json");
    CHECK(max_param_diff(back.model.params, c.model.params) == 0.0);
    CHECK(max_param_diff(back.adam.m, s.m) == 0.0);
    CHECK(max_param_diff(back.adam.v, s.v) == 0.0);
    CHECK(back.adam.t == s.t);
    CHECK(back.meta.at("scheme") == "binary");
    CHECK(forward(back.model, c.a_hat, c.x).logits == forward(c.model, c.a_hat, c.x).logits);

    std::ifstream in(dir / "ck.json");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream(dir / "trunc.json") << text.substr(0, text.size() / 2);
    CHECK(kind_of([&] { load_checkpoint(dir / "trunc.json"); }) == ErrorKind::SchemaViolation);

    auto doc = nlohmann::json::parse(text);
    doc["version"] = 0;
    std::ofstream(dir / "v0.json") << doc.dump();
    CHECK(kind_of([&] { load_checkpoint(dir / "v0.json"); }) == ErrorKind::VersionMismatch);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.json"), Error);
  }
}
