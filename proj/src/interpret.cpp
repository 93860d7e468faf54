#include "seegnn/interpret.hpp"

#include "seegnn/error.hpp"

#include <algorithm>
#include <set>

namespace seegnn {

using nlohmann::json;

std::string_view to_string(ImportanceMethod method) {
  return method == ImportanceMethod::Saliency ? "saliency" : "occlusion";
}

ImportanceMethod parse_importance_method(std::string_view text) {
  if (text == "saliency") return ImportanceMethod::Saliency;
  if (text == "occlusion") return ImportanceMethod::Occlusion;
  throw Error(ErrorKind::BadFlag, "method must be saliency or occlusion");
}

std::string_view to_string(ImportanceKey key) { return key == ImportanceKey::Region ? "region" : "label"; }

ImportanceKey parse_importance_key(std::string_view text) {
  if (text == "region") return ImportanceKey::Region;
  if (text == "label") return ImportanceKey::Label;
  throw Error(ErrorKind::BadFlag, "key must be region or label");
}

const std::string& importance_key(const ChannelInfo& channel, ImportanceKey key) {
  return key == ImportanceKey::Region ? channel.region : channel.label;
}

namespace {

void require_trained(const GcnModel& model) {
  if (model.params.all_zero()) throw Error(ErrorKind::UntrainedModel, "all model parameters are zero");
}

// key -> (seizure_id, value) contributions, summed in seizure-id order so the
// result does not depend on the order samples were given in.
using Contributions = std::map<std::string, std::vector<std::pair<std::string, double>>>;

std::map<std::string, double> reduce_mean(Contributions& contributions) {
  std::map<std::string, double> out;
  for (auto& [key, items] : contributions) {
    std::sort(items.begin(), items.end());
    double sum = 0.0;
    for (const auto& item : items) sum += item.second;
    out[key] = sum / static_cast<double>(items.size());
  }
  return out;
}

std::map<std::string, std::vector<std::size_t>> nodes_by_key(const GraphSample& s, ImportanceKey key) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < s.n_nodes(); ++i) out[importance_key(s.channels[i], key)].push_back(i);
  return out;
}

}  // namespace

ImportanceReport saliency_importance(const GcnModel& model, std::span<const GraphSample> samples,
                                     ImportanceKey key) {
  require_trained(model);
  if (samples.empty()) throw Error(ErrorKind::EmptyResult, "no samples for importance analysis");
  Contributions contributions;
  for (const auto& s : samples) {
    ForwardResult fwd = forward(model, s.a_hat, *s.features);
    const LossResult loss = softmax_cross_entropy(fwd.logits, s.label);
    const BackwardResult back = backward(model, fwd.cache, loss.dlogits, true);
    const Eigen::VectorXd node_scores = back.input_grad.cwiseAbs().rowwise().sum();
    for (const auto& [k, nodes] : nodes_by_key(s, key)) {
      double sum = 0.0;
      for (std::size_t i : nodes) sum += node_scores(static_cast<Eigen::Index>(i));
      contributions[k].emplace_back(s.seizure_id, sum / static_cast<double>(nodes.size()));
    }
  }
  ImportanceReport report;
  report.method = ImportanceMethod::Saliency;
  report.key = key;
  report.scores = reduce_mean(contributions);
  report.n_samples_used = static_cast<int>(samples.size());
  return report;
}

ImportanceReport occlusion_importance(const GcnModel& model, std::span<const GraphSample> samples,
                                      ImportanceKey key) {
  require_trained(model);
  if (samples.empty()) throw Error(ErrorKind::EmptyResult, "no samples for importance analysis");
  ImportanceReport report;
  report.method = ImportanceMethod::Occlusion;
  report.key = key;
  Contributions contributions;
  for (const auto& s : samples) {
    if (s.n_nodes() < 2) {
      ++report.n_skipped;
      continue;
    }
    const double base =
        softmax_cross_entropy(forward(model, s.a_hat, *s.features).logits, s.label).loss;
    bool skipped_any = false;
    const auto groups = nodes_by_key(s, key);
    for (const auto& [k, nodes] : groups) {
      std::vector<std::size_t> keep;
      std::size_t cursor = 0;
      for (std::size_t i = 0; i < s.n_nodes(); ++i) {
        if (cursor < nodes.size() && nodes[cursor] == i) {
          ++cursor;
        } else {
          keep.push_back(i);
        }
      }
      if (keep.empty()) {
        skipped_any = true;
        continue;
      }
      const GraphSample reduced = subset_nodes(s, keep);
      const double occluded =
          softmax_cross_entropy(forward(model, reduced.a_hat, *reduced.features).logits, s.label).loss;
      contributions[k].emplace_back(s.seizure_id, occluded - base);
    }
    report.n_skipped += skipped_any;
    ++report.n_samples_used;
  }
  report.scores = reduce_mean(contributions);
  for (auto& [k, v] : report.scores) v = std::max(v, 0.0);
  return report;
}

std::vector<std::string> top_k(const ImportanceReport& report, std::size_t k) {
  std::vector<std::pair<std::string, double>> items(report.scores.begin(), report.scores.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, items.size()); ++i) out.push_back(items[i].first);
  return out;
}

json to_json(const ImportanceReport& report, std::size_t k) {
  return {{"method", std::string(to_string(report.method))},
          {"key", std::string(to_string(report.key))},
          {"scores", report.scores},
          {"top", top_k(report, k)},
          {"n_samples_used", report.n_samples_used},
          {"n_skipped", report.n_skipped}};
}

ImportanceReport importance_from_json(const json& doc) {
  ImportanceReport report;
  try {
    report.method = parse_importance_method(doc.at("method").get<std::string>());
    report.key = parse_importance_key(doc.value("key", std::string("region")));
    report.scores = doc.at("scores").get<std::map<std::string, double>>();
    report.n_samples_used = doc.value("n_samples_used", 0);
    report.n_skipped = doc.value("n_skipped", 0);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaViolation, std::string("importance JSON: ") + e.what());
  }
  return report;
}

ReducedDataset reduce_dataset(const Dataset& dataset, std::span<const std::string> names,
                              ImportanceKey match) {
  if (names.empty()) throw Error(ErrorKind::InvalidConfig, "reduce needs at least one label");
  const std::set<std::string> wanted(names.begin(), names.end());
  ReducedDataset out;
  out.dataset.provenance = dataset.provenance;
  for (const auto& rec : dataset.recordings) {
    std::vector<Eigen::Index> keep;
    std::set<std::string> taken;
    for (std::size_t c = 0; c < rec.channels.size(); ++c) {
      const std::string& k = importance_key(rec.channels[c], match);
      if (!wanted.count(k)) continue;
      if (match == ImportanceKey::Region && !taken.insert(k).second) continue;
      keep.push_back(static_cast<Eigen::Index>(c));
    }
    if (keep.size() < 2) {
      out.dropped.push_back(rec.seizure_id);
      continue;
    }
    SeizureRecording reduced;
    reduced.seizure_id = rec.seizure_id;
    reduced.patient_id = rec.patient_id;
    reduced.engel = rec.engel;
    reduced.sampling_rate_hz = rec.sampling_rate_hz;
    reduced.signal.resize(static_cast<Eigen::Index>(keep.size()), rec.signal.cols());
    for (std::size_t r = 0; r < keep.size(); ++r) {
      reduced.channels.push_back(rec.channels[static_cast<std::size_t>(keep[r])]);
      reduced.signal.row(static_cast<Eigen::Index>(r)) = rec.signal.row(keep[r]);
    }
    out.dataset.recordings.push_back(std::move(reduced));
  }
  if (out.dataset.recordings.empty()) {
    throw Error(ErrorKind::EmptyResult, "no recording retains two or more of the selected channels");
  }
  return out;
}

ConnectivityReport connectivity_report(const ProcessedSample& sample, double threshold) {
  ConnectivityReport report;
  report.seizure_id = sample.seizure_id;
  report.patient_id = sample.patient_id;
  report.engel = std::string(to_string(sample.engel));
  report.threshold = threshold;
  report.weighted = correlation_matrix(sample);
  report.summary = thalamic_summary(report.weighted, threshold);
  report.binary = binarize(report.weighted, threshold);
  return report;
}

json to_json(const ConnectivityReport& r) {
  json edges = json::array();
  const auto n = static_cast<Eigen::Index>(r.binary.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (r.binary.adjacency(i, j)) edges.push_back({{"i", i}, {"j", j}, {"r", r.weighted.weights(i, j)}});
    }
  }
  json nodes = json::array();
  for (std::size_t i = 0; i < r.weighted.size(); ++i) {
    const auto& ch = r.weighted.nodes[i];
    nodes.push_back({{"label", ch.label},
                     {"region", ch.region},
                     {"is_thalamic", ch.is_thalamic},
                     {"is_soz", ch.is_soz},
                     {"strength", node_strength(r.weighted, i)}});
  }
  return {{"seizure_id", r.seizure_id},
          {"patient_id", r.patient_id},
          {"engel", r.engel},
          {"threshold", r.threshold},
          {"avg_thalamic_strength", r.summary.avg_thalamic_strength},
          {"thalamic_centrality", r.summary.thalamic_centrality},
          {"density", r.summary.density},
          {"n_thalamic", r.summary.n_thalamic},
          {"n_nodes", r.binary.size()},
          {"n_edges", edge_count(r.binary)},
          {"nodes", std::move(nodes)},
          {"edges", std::move(edges)}};
}

json compare_connectivity(const ConnectivityReport& a, const ConnectivityReport& b) {
  return {{"A", to_json(a)},
          {"B", to_json(b)},
          {"difference",
           {{"avg_thalamic_strength", a.summary.avg_thalamic_strength - b.summary.avg_thalamic_strength},
            {"thalamic_centrality", a.summary.thalamic_centrality - b.summary.thalamic_centrality},
            {"density", a.summary.density - b.summary.density}}}};
}

}  // namespace seegnn
