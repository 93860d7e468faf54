#pragma once

#include "seegnn/dataset_io.hpp"
#include "seegnn/gnn_core.hpp"
#include "seegnn/preprocess.hpp"

#include <json.hpp>

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seegnn {

enum class LabelScheme { Binary, ThreeClass };

std::string_view to_string(LabelScheme scheme);
LabelScheme parse_label_scheme(std::string_view text);
int n_classes(LabelScheme scheme);

// binary: {I, II} -> 0 (seizure free), {III, IV} -> 1.
// three_class: I -> 0, II -> 1, {III, IV} -> 2.
int map_engel(Engel engel, LabelScheme scheme);

// A preprocessed recording turned into model input. Features are shared so
// that splits and subsets copy cheaply.
struct GraphSample {
  std::string seizure_id;
  std::string patient_id;
  Engel engel = Engel::I;
  int label = 0;
  std::vector<ChannelInfo> channels;
  std::shared_ptr<const FeatureMatrix> features;
  Eigen::MatrixXd weights;  // signed Pearson r, zero diagonal
  Eigen::MatrixXd a_hat;    // normalized |r| adjacency
  std::vector<bool> constant;

  std::size_t n_nodes() const { return channels.size(); }
};

// Normalized GCN propagation matrix built from signed correlations.
Eigen::MatrixXd gcn_adjacency(const Eigen::MatrixXd& signed_weights);

GraphSample make_graph_sample(ProcessedSample&& sample, LabelScheme scheme);
std::vector<GraphSample> build_graph_samples(std::vector<ProcessedSample>&& samples,
                                             LabelScheme scheme);
std::vector<GraphSample> prepare_dataset(const Dataset& dataset, LabelScheme scheme,
                                         const PreprocessOptions& options = {});

// Keeps the listed nodes (in the given order), re-deriving the adjacency.
GraphSample subset_nodes(const GraphSample& sample, std::span<const std::size_t> keep);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per class, round((1 - ratio) * size) members go to test, clamped so both
// partitions get at least one. Index lists are sorted.
Split stratified_split(std::span<const int> labels, double ratio, std::uint64_t seed);
Split stratified_split(std::span<const GraphSample> samples, double ratio, std::uint64_t seed);

template <typename T>
std::vector<T> select(std::span<const T> items, std::span<const std::size_t> indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(items[i]);
  return out;
}

struct TrainConfig {
  int epochs = 100;
  double lr = 1e-3;
  int hidden = 64;
  double weight_decay = 1e-2;  // L2 on w1, w2, w_out
  double dropout = 0.0;
  double split_ratio = 0.8;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  // Running accuracy: predictions made just before each sample's update.
  double train_acc = 0.0;
};

struct TrainResult {
  GcnModel model;
  AdamState adam;
  std::vector<EpochStats> history;
};

// One Adam step per graph, graphs visited in a seeded shuffled order each
// epoch. Throws NonFiniteLoss naming the epoch and seizure id.
TrainResult train(std::span<const GraphSample> samples, LabelScheme scheme, const TrainConfig& config);

std::string history_csv(std::span<const EpochStats> history);

struct Prediction {
  int label = 0;
  Eigen::RowVectorXd probabilities;
};

// Argmax of the softmax; ties go to the lower class index.
Prediction predict_from_logits(const Eigen::RowVectorXd& logits);
Prediction predict(const GcnModel& model, const GraphSample& sample);

using ConfusionMatrix = std::vector<std::vector<long>>;

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support = 0;
};

struct EvalReport {
  std::string scheme;
  ConfusionMatrix confusion;  // rows = true class, cols = predicted
  double accuracy = 0.0;
  double precision = 0.0;  // support-weighted
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  long n = 0;
};

EvalReport metrics_from_confusion(const ConfusionMatrix& confusion);
nlohmann::json to_json(const EvalReport& report);

struct SamplePrediction {
  std::string seizure_id;
  std::string patient_id;
  int predicted = 0;
  int truth = 0;
};

struct Evaluation {
  EvalReport report;
  std::vector<SamplePrediction> predictions;
};

Evaluation evaluate_detailed(const GcnModel& model, std::span<const GraphSample> samples,
                             LabelScheme scheme);
EvalReport evaluate(const GcnModel& model, std::span<const GraphSample> samples, LabelScheme scheme);

// Majority vote per patient, ties toward the higher (worse-outcome) class.
// Patients appear in order of first prediction.
struct PatientVote {
  std::string patient_id;
  int predicted = 0;
  int truth = 0;
};

std::vector<PatientVote> patient_votes(std::span<const SamplePrediction> predictions);
EvalReport patient_wise(std::span<const SamplePrediction> predictions, int n_classes);

struct SearchSpace {
  std::vector<int> hidden{16, 32, 64, 128};
  double lr_min = 1e-4;
  double lr_max = 1e-2;
  double weight_decay_min = 1e-6;
  double weight_decay_max = 1e-3;
  std::vector<double> dropout{0.0, 0.2, 0.5};
};

struct TrialResult {
  int index = 0;
  TrainConfig config;
  double val_accuracy = 0.0;
};

struct SearchResult {
  TrainConfig best;
  int best_index = 0;
  std::vector<TrialResult> trials;  // ordered by trial index
};

// Seeded random search. Every trial trains on the same inner 80/20 split of
// `samples` and is scored by validation accuracy; ties go to the earliest
// trial. `base` supplies epochs and split_ratio. Trials may run on `jobs`
// threads without changing the result.
SearchResult hyper_search(std::span<const GraphSample> samples, LabelScheme scheme,
                          const SearchSpace& space, int n_trials, std::uint64_t seed,
                          const TrainConfig& base, int jobs = 1);

nlohmann::json to_json(const SearchResult& result);

}  // namespace seegnn
