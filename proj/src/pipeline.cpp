#include "seegnn/pipeline.hpp"

#include "seegnn/braingraph.hpp"
#include "seegnn/error.hpp"
#include "seegnn/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

namespace seegnn {

using nlohmann::json;

std::string_view to_string(LabelScheme scheme) {
  return scheme == LabelScheme::Binary ? "binary" : "three_class";
}

LabelScheme parse_label_scheme(std::string_view text) {
  if (text == "binary") return LabelScheme::Binary;
  if (text == "three_class") return LabelScheme::ThreeClass;
  throw Error(ErrorKind::BadFlag, "scheme must be binary or three_class, got \"" +
                                      std::string(text) + "\"");
}

int n_classes(LabelScheme scheme) { return scheme == LabelScheme::Binary ? 2 : 3; }

int map_engel(Engel engel, LabelScheme scheme) {
  if (scheme == LabelScheme::Binary) return (engel == Engel::I || engel == Engel::II) ? 0 : 1;
  switch (engel) {
    case Engel::I: return 0;
    case Engel::II: return 1;
    default: return 2;
  }
}

Eigen::MatrixXd gcn_adjacency(const Eigen::MatrixXd& signed_weights) {
  return normalize_adjacency(signed_weights.cwiseAbs());
}

GraphSample make_graph_sample(ProcessedSample&& sample, LabelScheme scheme) {
  GraphSample out;
  const BrainGraph graph = correlation_matrix(sample);
  out.seizure_id = std::move(sample.seizure_id);
  out.patient_id = std::move(sample.patient_id);
  out.engel = sample.engel;
  out.label = map_engel(sample.engel, scheme);
  out.channels = std::move(sample.channels);
  out.constant = std::move(sample.constant_channel);
  out.features = std::make_shared<const FeatureMatrix>(std::move(sample.features));
  out.weights = graph.weights;
  out.a_hat = gcn_adjacency(out.weights);
  return out;
}

std::vector<GraphSample> build_graph_samples(std::vector<ProcessedSample>&& samples,
                                             LabelScheme scheme) {
  std::vector<GraphSample> out;
  out.reserve(samples.size());
  for (auto& s : samples) out.push_back(make_graph_sample(std::move(s), scheme));
  samples.clear();
  return out;
}

std::vector<GraphSample> prepare_dataset(const Dataset& dataset, LabelScheme scheme,
                                         const PreprocessOptions& options) {
  std::vector<GraphSample> out;
  out.reserve(dataset.recordings.size());
  for (const auto& rec : dataset.recordings) {
    out.push_back(make_graph_sample(preprocess_recording(rec, options), scheme));
  }
  return out;
}

GraphSample subset_nodes(const GraphSample& sample, std::span<const std::size_t> keep) {
  GraphSample out;
  out.seizure_id = sample.seizure_id;
  out.patient_id = sample.patient_id;
  out.engel = sample.engel;
  out.label = sample.label;
  const auto k = static_cast<Eigen::Index>(keep.size());
  auto features = std::make_shared<FeatureMatrix>(k, sample.features->cols());
  out.weights.resize(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const auto i = static_cast<Eigen::Index>(keep[static_cast<std::size_t>(a)]);
    if (i >= static_cast<Eigen::Index>(sample.n_nodes())) {
      throw Error(ErrorKind::IndexOutOfRange, "subset index " + std::to_string(i));
    }
    out.channels.push_back(sample.channels[static_cast<std::size_t>(i)]);
    out.constant.push_back(sample.constant[static_cast<std::size_t>(i)]);
    features->row(a) = sample.features->row(i);
    for (Eigen::Index b = 0; b < k; ++b) {
      out.weights(a, b) = sample.weights(i, static_cast<Eigen::Index>(keep[static_cast<std::size_t>(b)]));
    }
  }
  out.features = std::move(features);
  out.a_hat = gcn_adjacency(out.weights);
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

Split stratified_split(std::span<const int> labels, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::InvalidConfig, "split ratio must lie in (0, 1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [label, members] : by_class) {
    if (members.size() < 2) {
      throw Error(ErrorKind::ClassTooSmall, "class " + std::to_string(label) + " has " +
                                                std::to_string(members.size()) +
                                                " sample(s); stratified split needs >= 2");
    }
  }
  Rng rng(seed);
  Split split;
  for (auto& [label, members] : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    const auto m = static_cast<long>(members.size());
    long n_test = std::lround((1.0 - ratio) * static_cast<double>(m));
    n_test = std::clamp(n_test, 1L, m - 1);
    split.test.insert(split.test.end(), members.begin(), members.begin() + n_test);
    split.train.insert(split.train.end(), members.begin() + n_test, members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Split stratified_split(std::span<const GraphSample> samples, double ratio, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.label);
  return stratified_split(labels, ratio, seed);
}

// ---------------------------------------------------------------------------
// Training

void validate(const TrainConfig& c) {
  if (c.epochs < 1) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 1");
  if (!(c.lr >= 0.0) || !std::isfinite(c.lr)) throw Error(ErrorKind::InvalidConfig, "lr must be >= 0");
  if (c.hidden < 1) throw Error(ErrorKind::InvalidConfig, "hidden must be >= 1");
  if (!(c.weight_decay >= 0.0)) throw Error(ErrorKind::InvalidConfig, "weight_decay must be >= 0");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw Error(ErrorKind::InvalidConfig, "dropout must lie in [0, 1)");
  if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "split_ratio must lie in (0, 1)");
  }
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},         {"lr", c.lr},
          {"hidden", c.hidden},         {"weight_decay", c.weight_decay},
          {"dropout", c.dropout},       {"split_ratio", c.split_ratio},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& doc) {
  TrainConfig c;
  try {
    c.epochs = doc.value("epochs", c.epochs);
    c.lr = doc.value("lr", c.lr);
    c.hidden = doc.value("hidden", c.hidden);
    c.weight_decay = doc.value("weight_decay", c.weight_decay);
    c.dropout = doc.value("dropout", c.dropout);
    c.split_ratio = doc.value("split_ratio", c.split_ratio);
    c.seed = doc.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaViolation, std::string("train config: ") + e.what());
  }
  validate(c);
  return c;
}

TrainResult train(std::span<const GraphSample> samples, LabelScheme scheme, const TrainConfig& config) {
  validate(config);
  if (samples.empty()) throw Error(ErrorKind::InvalidConfig, "training set is empty");
  const int classes = n_classes(scheme);
  const int in_dim = static_cast<int>(samples.front().features->cols());

  TrainResult result;
  result.model = init_model(config.hidden, classes, mix_seed(config.seed, 1), in_dim);
  result.adam = make_adam_state(result.model, config.lr);
  Rng shuffle_rng(mix_seed(config.seed, 2));
  Rng dropout_rng(mix_seed(config.seed, 3));

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> losses(samples.size());
  std::vector<char> correct(samples.size());

  GcnModel& model = result.model;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t idx : order) {
      const GraphSample& s = samples[idx];
      if (s.label >= classes) throw Error(ErrorKind::LabelOutOfRange, s.seizure_id + ": label out of range");
      ForwardResult fwd = forward(model, s.a_hat, *s.features, {config.dropout, &dropout_rng});
      LossResult loss = softmax_cross_entropy(fwd.logits, s.label);
      if (!std::isfinite(loss.loss)) {
        throw Error(ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch) + ", sample " +
                                                  s.seizure_id + ": loss is not finite");
      }
      losses[idx] = loss.loss;
      correct[idx] = predict_from_logits(fwd.logits).label == s.label;

      BackwardResult back = backward(model, fwd.cache, loss.dlogits);
      if (config.weight_decay > 0.0) {
        back.grads.w1 += config.weight_decay * model.params.w1;
        back.grads.w2 += config.weight_decay * model.params.w2;
        back.grads.w_out += config.weight_decay * model.params.w_out;
      }
      if (!back.grads.all_finite()) {
        throw Error(ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch) + ", sample " +
                                                  s.seizure_id + ": gradient is not finite");
      }
      adam_step(model, back.grads, result.adam);
    }
    // Reduce in sample-index order so the epoch loss does not depend on the shuffle.
    EpochStats stats;
    stats.epoch = epoch;
    double total = 0.0;
    long hits = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      total += losses[i];
      hits += correct[i];
    }
    stats.loss = total / static_cast<double>(samples.size());
    stats.train_acc = static_cast<double>(hits) / static_cast<double>(samples.size());
    result.history.push_back(stats);
  }
  return result;
}

std::string history_csv(std::span<const EpochStats> history) {
  std::ostringstream out;
  out << "epoch,loss,train_acc\n";
  char buf[96];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", h.epoch, h.loss, h.train_acc);
    out << buf;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Prediction and metrics

Prediction predict_from_logits(const Eigen::RowVectorXd& logits) {
  Prediction out;
  out.probabilities = softmax(logits);
  int best = 0;
  for (int k = 1; k < logits.size(); ++k) {
    if (logits(k) > logits(best)) best = k;
  }
  out.label = best;
  return out;
}

Prediction predict(const GcnModel& model, const GraphSample& sample) {
  return predict_from_logits(forward(model, sample.a_hat, *sample.features).logits);
}

EvalReport metrics_from_confusion(const ConfusionMatrix& confusion) {
  const std::size_t c = confusion.size();
  if (c == 0) throw Error(ErrorKind::EmptyMatrix, "confusion matrix is empty");
  long total = 0;
  for (const auto& row : confusion) {
    if (row.size() != c) throw Error(ErrorKind::ShapeMismatch, "confusion matrix must be square");
    for (long v : row) {
      if (v < 0) throw Error(ErrorKind::SchemaViolation, "confusion entries must be >= 0");
      total += v;
    }
  }
  if (total == 0) throw Error(ErrorKind::EmptyMatrix, "confusion matrix has no samples");

  EvalReport report;
  report.confusion = confusion;
  report.n = total;
  long trace = 0;
  for (std::size_t k = 0; k < c; ++k) {
    long row_sum = 0, col_sum = 0;
    for (std::size_t j = 0; j < c; ++j) {
      row_sum += confusion[k][j];
      col_sum += confusion[j][k];
    }
    const long tp = confusion[k][k];
    trace += tp;
    ClassMetrics m;
    m.support = row_sum;
    m.precision = col_sum == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(col_sum);
    m.recall = row_sum == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(row_sum);
    m.f1 = (m.precision + m.recall) == 0.0 ? 0.0
                                           : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    report.per_class.push_back(m);
  }
  const double n = static_cast<double>(total);
  report.accuracy = static_cast<double>(trace) / n;
  for (const auto& m : report.per_class) {
    const double w = static_cast<double>(m.support) / n;
    report.precision += w * m.precision;
    report.recall += w * m.recall;
    report.f1 += w * m.f1;
  }
  return report;
}

json to_json(const EvalReport& r) {
  json per_class = json::array();
  for (std::size_t k = 0; k < r.per_class.size(); ++k) {
    const auto& m = r.per_class[k];
    per_class.push_back({{"class", k},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"support", m.support}});
  }
  return {{"scheme", r.scheme},   {"confusion", r.confusion}, {"accuracy", r.accuracy},
          {"precision", r.precision}, {"recall", r.recall},   {"f1", r.f1},
          {"per_class", std::move(per_class)}, {"n", r.n}};
}

Evaluation evaluate_detailed(const GcnModel& model, std::span<const GraphSample> samples,
                             LabelScheme scheme) {
  if (samples.empty()) throw Error(ErrorKind::EmptyMatrix, "no samples to evaluate");
  const int classes = n_classes(scheme);
  if (model.n_classes != classes) {
    throw Error(ErrorKind::ShapeMismatch, "model has " + std::to_string(model.n_classes) +
                                              " outputs but scheme " + std::string(to_string(scheme)) +
                                              " needs " + std::to_string(classes));
  }
  Evaluation out;
  ConfusionMatrix confusion(static_cast<std::size_t>(classes),
                            std::vector<long>(static_cast<std::size_t>(classes), 0));
  for (const auto& s : samples) {
    const Prediction p = predict(model, s);
    ++confusion[static_cast<std::size_t>(s.label)][static_cast<std::size_t>(p.label)];
    out.predictions.push_back({s.seizure_id, s.patient_id, p.label, s.label});
  }
  out.report = metrics_from_confusion(confusion);
  out.report.scheme = std::string(to_string(scheme));
  return out;
}

EvalReport evaluate(const GcnModel& model, std::span<const GraphSample> samples, LabelScheme scheme) {
  return evaluate_detailed(model, samples, scheme).report;
}

std::vector<PatientVote> patient_votes(std::span<const SamplePrediction> predictions) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<int, std::map<int, int>>> tally;
  for (const auto& p : predictions) {
    auto it = tally.find(p.patient_id);
    if (it == tally.end()) {
      order.push_back(p.patient_id);
      it = tally.emplace(p.patient_id, std::make_pair(p.truth, std::map<int, int>{})).first;
    } else if (it->second.first != p.truth) {
      throw Error(ErrorKind::InconsistentTruth, "patient " + p.patient_id +
                                                    " has seizures with different true labels");
    }
    ++it->second.second[p.predicted];
  }
  std::vector<PatientVote> votes;
  for (const auto& pid : order) {
    const auto& [truth, counts] = tally.at(pid);
    int best = -1, best_count = -1;
    for (const auto& [label, count] : counts) {
      // Ascending label order, so >= lets the higher class win a tie.
      if (count >= best_count) {
        best = label;
        best_count = count;
      }
    }
    votes.push_back({pid, best, truth});
  }
  return votes;
}

EvalReport patient_wise(std::span<const SamplePrediction> predictions, int classes) {
  if (predictions.empty()) throw Error(ErrorKind::EmptyMatrix, "no predictions");
  ConfusionMatrix confusion(static_cast<std::size_t>(classes),
                            std::vector<long>(static_cast<std::size_t>(classes), 0));
  for (const auto& v : patient_votes(predictions)) {
    if (v.truth < 0 || v.truth >= classes || v.predicted < 0 || v.predicted >= classes) {
      throw Error(ErrorKind::LabelOutOfRange, "patient " + v.patient_id + ": label out of range");
    }
    ++confusion[static_cast<std::size_t>(v.truth)][static_cast<std::size_t>(v.predicted)];
  }
  EvalReport report = metrics_from_confusion(confusion);
  report.scheme = classes == 2 ? "binary" : "three_class";
  return report;
}

// ---------------------------------------------------------------------------
// Hyperparameter search

SearchResult hyper_search(std::span<const GraphSample> samples, LabelScheme scheme,
                          const SearchSpace& space, int n_trials, std::uint64_t seed,
                          const TrainConfig& base, int jobs) {
  if (space.hidden.empty() || space.dropout.empty() || !(space.lr_min > 0.0) ||
      space.lr_max < space.lr_min || !(space.weight_decay_min > 0.0) ||
      space.weight_decay_max < space.weight_decay_min) {
    throw Error(ErrorKind::EmptySpace, "search space has an empty dimension");
  }
  if (n_trials < 1) throw Error(ErrorKind::InvalidConfig, "n_trials must be >= 1");
  validate(base);

  const Split inner = stratified_split(samples, 0.8, mix_seed(seed, 7));
  const auto fit = select(samples, std::span<const std::size_t>(inner.train));
  const auto val = select(samples, std::span<const std::size_t>(inner.test));

  SearchResult result;
  result.trials.resize(static_cast<std::size_t>(n_trials));
  for (int t = 0; t < n_trials; ++t) {
    Rng rng(mix_seed(seed, 100 + static_cast<std::uint64_t>(t)));
    TrainConfig c = base;
    c.hidden = space.hidden[rng.below(space.hidden.size())];
    c.lr = std::exp(rng.uniform(std::log(space.lr_min), std::log(space.lr_max)));
    c.weight_decay =
        std::exp(rng.uniform(std::log(space.weight_decay_min), std::log(space.weight_decay_max)));
    c.dropout = space.dropout[rng.below(space.dropout.size())];
    c.seed = mix_seed(seed, 200 + static_cast<std::uint64_t>(t));
    result.trials[static_cast<std::size_t>(t)] = {t, c, 0.0};
  }

  std::atomic<int> next{0};
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(n_trials));
  auto worker = [&] {
    for (int t = next++; t < n_trials; t = next++) {
      auto& trial = result.trials[static_cast<std::size_t>(t)];
      try {
        const TrainResult trained = train(fit, scheme, trial.config);
        trial.val_accuracy = evaluate(trained.model, val, scheme).accuracy;
      } catch (...) {
        failures[static_cast<std::size_t>(t)] = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(jobs, 1, n_trials);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  for (const auto& trial : result.trials) {
    if (trial.val_accuracy > result.trials[static_cast<std::size_t>(result.best_index)].val_accuracy) {
      result.best_index = trial.index;
    }
  }
  result.best = result.trials[static_cast<std::size_t>(result.best_index)].config;
  return result;
}

json to_json(const SearchResult& r) {
  json trials = json::array();
  for (const auto& t : r.trials) {
    trials.push_back({{"index", t.index}, {"config", to_json(t.config)}, {"val_accuracy", t.val_accuracy}});
  }
  return {{"best_index", r.best_index}, {"best", to_json(r.best)}, {"trials", std::move(trials)}};
}

}  // namespace seegnn
