#include "seegnn/error.hpp"
#include "seegnn/pipeline.hpp"
#include "seegnn/rng.hpp"
#include "support.hpp"

#include <doctest.h>

#include <map>
#include <numeric>
#include <random>
#include <set>

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

const std::vector<GraphSample>& tiny_binary() {
  static const std::vector<GraphSample> samples =
      prepare_dataset(generate_synthetic(testsupport::small_cohort(31)), LabelScheme::Binary);
  return samples;
}

TrainConfig quick(std::uint64_t seed, int epochs = 5) {
  TrainConfig c;
  c.seed = seed;
  c.epochs = epochs;
  c.hidden = 8;
  return c;
}

ConfusionMatrix paper_matrix() { return {{13, 4, 2}, {2, 37, 1}, {1, 3, 7}}; }

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("engel to class mapping") {
    CHECK(map_engel(Engel::I, LabelScheme::Binary) == 0);
    CHECK(map_engel(Engel::II, LabelScheme::Binary) == 0);
    CHECK(map_engel(Engel::III, LabelScheme::Binary) == 1);
    CHECK(map_engel(Engel::IV, LabelScheme::Binary) == 1);
    CHECK(map_engel(Engel::I, LabelScheme::ThreeClass) == 0);
    CHECK(map_engel(Engel::II, LabelScheme::ThreeClass) == 1);
    CHECK(map_engel(Engel::III, LabelScheme::ThreeClass) == 2);
    CHECK(map_engel(Engel::IV, LabelScheme::ThreeClass) == 2);
    CHECK(n_classes(LabelScheme::Binary) == 2);
    CHECK(n_classes(LabelScheme::ThreeClass) == 3);
    CHECK(parse_label_scheme("three_class") == LabelScheme::ThreeClass);
    CHECK(kind_of([] { parse_label_scheme("four"); }) == ErrorKind::BadFlag);
  }

  TEST_CASE("stratified split arithmetic") {
    std::vector<int> labels(20);
    for (int i = 0; i < 20; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
    const Split s = stratified_split(labels, 0.8, 1);
    std::map<int, int> test_count, train_count;
    for (auto i : s.test) ++test_count[labels[i]];
    for (auto i : s.train) ++train_count[labels[i]];
    CHECK(test_count[0] == 2);
    CHECK(test_count[1] == 2);
    CHECK(train_count[0] == 8);
    CHECK(train_count[1] == 8);
    const Split again = stratified_split(labels, 0.8, 1);
    CHECK(again.train == s.train);
    CHECK(again.test == s.test);
    CHECK(stratified_split(labels, 0.8, 2).test != s.test);

    std::vector<int> lonely{0, 0, 0, 1};
    CHECK(kind_of([&] { stratified_split(lonely, 0.8, 1); }) == ErrorKind::ClassTooSmall);
    CHECK(kind_of([&] { stratified_split(labels, 1.0, 1); }) == ErrorKind::InvalidConfig);
  }

  TEST_CASE("stratified split is disjoint, exhaustive and proportional") {
    std::mt19937_64 gen(2);
    std::uniform_int_distribution<int> classes(2, 3), size(2, 40);
    std::uniform_real_distribution<double> ratio(0.05, 0.95);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<int> labels;
      const int c = classes(gen);
      for (int k = 0; k < c; ++k) labels.insert(labels.end(), static_cast<std::size_t>(size(gen)), k);
      std::shuffle(labels.begin(), labels.end(), gen);
      const double r = ratio(gen);
      const Split s = stratified_split(labels, r, static_cast<std::uint64_t>(trial));
      std::vector<std::size_t> all(s.train);
      all.insert(all.end(), s.test.begin(), s.test.end());
      std::sort(all.begin(), all.end());
      std::vector<std::size_t> expected(labels.size());
      std::iota(expected.begin(), expected.end(), 0);
      CHECK(all == expected);
      for (int k = 0; k < c; ++k) {
        const auto members = static_cast<double>(std::count(labels.begin(), labels.end(), k));
        const auto in_test =
            static_cast<double>(std::count_if(s.test.begin(), s.test.end(), [&](std::size_t i) { return labels[i] == k; }));
        CHECK(in_test >= 1);
        CHECK(in_test <= members - 1);
        CHECK(std::abs(in_test - (1 - r) * members) <= 1.0);
      }
    }
  }

  TEST_CASE("metrics reproduce the published three-class row") {
    const EvalReport r = metrics_from_confusion(paper_matrix());
    CHECK(r.n == 70);
    CHECK(r.accuracy == doctest::Approx(57.0 / 70.0));
    CHECK(std::abs(r.accuracy - 0.8143) <= 0.0005);
    CHECK(std::abs(r.precision - 0.8110) <= 0.0005);
    CHECK(std::abs(r.recall - 0.8143) <= 0.0005);
    CHECK(std::abs(r.f1 - 0.8098) <= 0.0005);
    // Independent hand computation of one class: row 0 = 13/19 recall, col 0 = 13/16 precision.
    CHECK(r.per_class[0].recall == doctest::Approx(13.0 / 19.0));
    CHECK(r.per_class[0].precision == doctest::Approx(13.0 / 16.0));
    CHECK(r.per_class[0].support == 19);
  }

  TEST_CASE("metrics degenerate cases") {
    const EvalReport perfect = metrics_from_confusion({{5, 0}, {0, 5}});
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);
    const EvalReport never = metrics_from_confusion({{4, 0}, {3, 0}});
    CHECK(never.per_class[1].precision == 0.0);
    CHECK(never.per_class[1].f1 == 0.0);
    CHECK(never.accuracy == doctest::Approx(4.0 / 7.0));
    CHECK(kind_of([] { metrics_from_confusion({}); }) == ErrorKind::EmptyMatrix);
    CHECK(kind_of([] { metrics_from_confusion({{0, 0}, {0, 0}}); }) == ErrorKind::EmptyMatrix);
  }

  TEST_CASE("weighted recall equals accuracy and F1 is bracketed") {
    std::mt19937_64 gen(3);
    std::uniform_int_distribution<long> cell(0, 30);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t c = trial % 2 ? 3 : 2;
      ConfusionMatrix m(c, std::vector<long>(c));
      for (auto& row : m)
        for (auto& v : row) v = cell(gen);
      m[0][0] += 1;
      const EvalReport r = metrics_from_confusion(m);
      CHECK(std::abs(r.recall - r.accuracy) < 1e-12);
      long total = 0;
      for (const auto& row : m) total = std::accumulate(row.begin(), row.end(), total);
      CHECK(r.n == total);
      for (const auto& k : r.per_class) {
        CHECK(k.f1 >= std::min(k.precision, k.recall) - 1e-15);
        CHECK(k.f1 <= std::max(k.precision, k.recall) + 1e-15);
      }
    }
  }

  TEST_CASE("prediction tie rule and probabilities") {
    const Prediction p = predict_from_logits(Eigen::RowVector2d(2, -1));
    CHECK(p.label == 0);
    CHECK(p.probabilities(0) == doctest::Approx(0.9525741268).epsilon(1e-9));
    CHECK(p.probabilities(1) == doctest::Approx(0.0474258732).epsilon(1e-8));
    CHECK(predict_from_logits(Eigen::RowVector3d(1, 1, 1)).label == 0);
    CHECK(predict_from_logits(Eigen::RowVector3d(0, 4, 4)).label == 1);
    std::mt19937_64 gen(4);
    std::normal_distribution<double> d(0, 30);
    for (int i = 0; i < 100; ++i) {
      const auto q = predict_from_logits(Eigen::RowVector3d(d(gen), d(gen), d(gen)));
      CHECK(std::abs(q.probabilities.sum() - 1.0) < 1e-12);
    }
  }

  TEST_CASE("patient-wise voting") {
    std::vector<SamplePrediction> preds{{"a1", "A", 0, 0}, {"a2", "A", 0, 0}, {"a3", "A", 1, 0},
                                        {"b1", "B", 0, 1}, {"b2", "B", 1, 1}};
    const auto votes = patient_votes(preds);
    REQUIRE(votes.size() == 2);
    CHECK(votes[0].patient_id == "A");
    CHECK(votes[0].predicted == 0);
    CHECK(votes[1].predicted == 1);
    const EvalReport r = patient_wise(preds, 2);
    CHECK(r.accuracy == 1.0);
    CHECK(r.n == 2);

    std::vector<SamplePrediction> singles{{"a", "A", 0, 0}, {"b", "B", 1, 0}, {"c", "C", 1, 1}, {"d", "D", 0, 1}};
    const EvalReport pw = patient_wise(singles, 2);
    const EvalReport direct = metrics_from_confusion({{1, 1}, {1, 1}});
    CHECK(pw.confusion == direct.confusion);
    CHECK(pw.f1 == direct.f1);

    preds.push_back({"a4", "A", 0, 1});
    CHECK(kind_of([&] { patient_votes(preds); }) == ErrorKind::InconsistentTruth);
  }

  TEST_CASE("train config validation and JSON") {
    TrainConfig c;
    CHECK(c.epochs == 100);
    CHECK(c.split_ratio == 0.8);
    CHECK_NOTHROW(validate(c));
    c.epochs = 0;
    CHECK(kind_of([&] { validate(c); }) == ErrorKind::InvalidConfig);
    c = TrainConfig{};
    c.dropout = 1.0;
    CHECK(kind_of([&] { validate(c); }) == ErrorKind::InvalidConfig);
    c = TrainConfig{};
    c.lr = -1;
    CHECK(kind_of([&] { validate(c); }) == ErrorKind::InvalidConfig);
    c = TrainConfig{};
    c.lr = 0.0123;
    c.hidden = 32;
    c.seed = 77;
    const TrainConfig back = train_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
  }

  TEST_CASE("training is deterministic and lr 0 is a no-op") {
    const auto& samples = tiny_binary();
    const auto a = train(samples, LabelScheme::Binary, quick(5));
    const auto b = train(samples, LabelScheme::Binary, quick(5));
    CHECK(history_csv(a.history) == history_csv(b.history));
    CHECK(a.history.size() == 5);
    CHECK(a.model.params.w1 == b.model.params.w1);

    TrainConfig frozen = quick(6, 4);
    frozen.lr = 0.0;
    const auto z = train(samples, LabelScheme::Binary, frozen);
    const GcnModel init = init_model(frozen.hidden, 2, mix_seed(6, 1));
    CHECK(z.model.params.w1 == init.params.w1);
    CHECK(z.model.params.b_out == init.params.b_out);
    for (const auto& h : z.history) CHECK(h.loss == z.history.front().loss);

    const std::string csv = history_csv(a.history);
    CHECK(csv.rfind("epoch,loss,train_acc\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  }

  TEST_CASE("training fits a small cohort") {
    const auto& samples = tiny_binary();
    TrainConfig c = quick(7, 60);
    c.hidden = 16;
    const auto r = train(samples, LabelScheme::Binary, c);
    CHECK(r.history.back().train_acc == 1.0);
    CHECK(evaluate(r.model, samples, LabelScheme::Binary).accuracy == 1.0);
    for (const auto& h : r.history) CHECK(std::isfinite(h.loss));
  }

  TEST_CASE("evaluate conservation, constant model and shape check") {
    const auto& samples = tiny_binary();
    GcnModel m = init_model(4, 2, 8);
    m.params.w_out.setZero();
    m.params.b_out << 1.0, 0.0;
    std::vector<GraphSample> balanced;
    int zeros = 0, ones = 0;
    for (const auto& s : samples) {
      if (s.label == 0 && zeros < 2) {
        balanced.push_back(s);
        ++zeros;
      } else if (s.label == 1 && ones < 2) {
        balanced.push_back(s);
        ++ones;
      }
    }
    const EvalReport r = evaluate(m, balanced, LabelScheme::Binary);
    CHECK(r.accuracy == 0.5);
    CHECK(r.n == 4);
    CHECK(r.scheme == "binary");
    CHECK(kind_of([&] { evaluate(m, balanced, LabelScheme::ThreeClass); }) == ErrorKind::ShapeMismatch);
  }

  TEST_CASE("subset_nodes rebuilds the adjacency") {
    const GraphSample& s = tiny_binary().front();
    const std::vector<std::size_t> keep{3, 0, 5};
    const GraphSample sub = subset_nodes(s, keep);
    CHECK(sub.n_nodes() == 3);
    CHECK(sub.channels[0] == s.channels[3]);
    CHECK(sub.weights(0, 1) == s.weights(3, 0));
    CHECK((sub.a_hat - gcn_adjacency(sub.weights)).norm() == 0.0);
    CHECK(sub.features->row(2) == s.features->row(5));
  }

  TEST_CASE("hyperparameter search") {
    const auto& samples = tiny_binary();
    TrainConfig base = quick(0, 2);
    const SearchResult one = hyper_search(samples, LabelScheme::Binary, SearchSpace{}, 1, 9, base);
    REQUIRE(one.trials.size() == 1);
    CHECK(to_json(one.best) == to_json(one.trials[0].config));

    const SearchResult a = hyper_search(samples, LabelScheme::Binary, SearchSpace{}, 4, 10, base, 1);
    const SearchResult b = hyper_search(samples, LabelScheme::Binary, SearchSpace{}, 4, 10, base, 3);
    CHECK(to_json(a) == to_json(b));
    for (const auto& t : a.trials) {
      CHECK(t.val_accuracy <= a.trials[static_cast<std::size_t>(a.best_index)].val_accuracy);
      const std::set<int> widths{16, 32, 64, 128};
      const std::set<double> drops{0.0, 0.2, 0.5};
      CHECK(widths.count(t.config.hidden));
      CHECK(drops.count(t.config.dropout));
      CHECK(t.config.lr >= 1e-4);
      CHECK(t.config.lr <= 1e-2);
      CHECK(t.config.weight_decay >= 1e-6);
      CHECK(t.config.weight_decay <= 1e-3);
      CHECK(t.config.epochs == 2);
    }
    for (int i = 0; i < a.best_index; ++i) {
      CHECK(a.trials[static_cast<std::size_t>(i)].val_accuracy < a.trials[static_cast<std::size_t>(a.best_index)].val_accuracy);
    }

    SearchSpace empty;
    empty.hidden.clear();
    CHECK(kind_of([&] { hyper_search(samples, LabelScheme::Binary, empty, 2, 1, base); }) == ErrorKind::EmptySpace);
  }
}
