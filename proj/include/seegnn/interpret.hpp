#pragma once

#include "seegnn/braingraph.hpp"
#include "seegnn/dataset_io.hpp"
#include "seegnn/gnn_core.hpp"
#include "seegnn/pipeline.hpp"

#include <json.hpp>

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seegnn {

enum class ImportanceMethod { Saliency, Occlusion };

// Scores are keyed by region name (default, comparable across patients) or by
// raw channel label.
enum class ImportanceKey { Region, Label };

std::string_view to_string(ImportanceMethod method);
ImportanceMethod parse_importance_method(std::string_view text);
std::string_view to_string(ImportanceKey key);
ImportanceKey parse_importance_key(std::string_view text);

const std::string& importance_key(const ChannelInfo& channel, ImportanceKey key);

struct ImportanceReport {
  ImportanceMethod method = ImportanceMethod::Saliency;
  ImportanceKey key = ImportanceKey::Region;
  std::map<std::string, double> scores;
  int n_samples_used = 0;
  // Occlusion: samples where removing a key would leave an empty graph.
  int n_skipped = 0;
};

// Per sample: sum over feature positions of |dLoss/dX| per node, averaged
// over the nodes sharing a key; then averaged over the samples containing
// that key.
ImportanceReport saliency_importance(const GcnModel& model, std::span<const GraphSample> samples,
                                     ImportanceKey key = ImportanceKey::Region);

// Per key: mean loss increase when every node carrying the key is removed and
// the graph is rebuilt without it; a negative mean is clamped to 0.
ImportanceReport occlusion_importance(const GcnModel& model, std::span<const GraphSample> samples,
                                      ImportanceKey key = ImportanceKey::Region);

// Descending score, ties lexicographic; at most k entries.
std::vector<std::string> top_k(const ImportanceReport& report, std::size_t k = 10);

nlohmann::json to_json(const ImportanceReport& report, std::size_t k = 10);
ImportanceReport importance_from_json(const nlohmann::json& doc);

struct ReducedDataset {
  Dataset dataset;
  std::vector<std::string> dropped;  // seizure ids left with < 2 channels
};

// Label matching keeps every channel whose label is listed. Region matching
// keeps the first channel (manifest order) of each listed region, so a
// recording never retains more channels than there are names.
ReducedDataset reduce_dataset(const Dataset& dataset, std::span<const std::string> names,
                              ImportanceKey match = ImportanceKey::Region);

struct ConnectivityReport {
  std::string seizure_id;
  std::string patient_id;
  std::string engel;
  double threshold = 0.5;
  ThalamicSummary summary;
  BrainGraph weighted;
  BinaryGraph binary;
};

ConnectivityReport connectivity_report(const ProcessedSample& sample, double threshold);
nlohmann::json to_json(const ConnectivityReport& report);
// Side-by-side A/B comparison.
nlohmann::json compare_connectivity(const ConnectivityReport& a, const ConnectivityReport& b);

}  // namespace seegnn
