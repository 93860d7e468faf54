#pragma once

#include "seegnn/dataset_io.hpp"
#include "seegnn/preprocess.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seegnn {

// Fully connected weighted graph. weights holds signed Pearson r with a zero
// diagonal; constant[i] marks channels whose correlations were forced to 0.
struct BrainGraph {
  std::vector<ChannelInfo> nodes;
  Eigen::MatrixXd weights;
  std::vector<bool> constant;

  std::size_t size() const { return nodes.size(); }
};

// adjacency(i, j) == 1 iff |r_ij| >= threshold.
struct BinaryGraph {
  std::vector<ChannelInfo> nodes;
  Eigen::MatrixXi adjacency;
  double threshold = 0.0;

  std::size_t size() const { return nodes.size(); }
};

struct Correlation {
  double r = 0.0;
  // Either input had sd < 1e-8; r is reported as 0.
  bool degenerate = false;
};

Correlation pearson(std::span<const double> x, std::span<const double> y);

BrainGraph correlation_matrix(const FeatureMatrix& features, std::vector<ChannelInfo> nodes);
BrainGraph correlation_matrix(const ProcessedSample& sample);

BinaryGraph binarize(const BrainGraph& graph, double threshold);

std::size_t edge_count(const BinaryGraph& graph);

// 2E / (n(n-1)).
double density(const BinaryGraph& graph);

struct Centrality {
  Eigen::VectorXd values;
  // Adjacency had no nonzero entry; values is the zero vector.
  bool disconnected_or_empty = false;
  int iterations = 0;
  bool converged = false;
};

inline constexpr double kCentralityTolerance = 1e-10;
inline constexpr int kCentralityMaxIterations = 10000;

// Principal eigenvector of a nonnegative symmetric matrix, unit norm, entries
// >= 0. Iterates on A + cI with a positive shift so bipartite graphs converge.
Centrality eigenvector_centrality(const Eigen::MatrixXd& nonnegative_adjacency);
// Weighted view: uses |r|.
Centrality eigenvector_centrality(const BrainGraph& graph);
Centrality eigenvector_centrality(const BinaryGraph& graph);

// Weighted degree: sum over other nodes of |r|.
double node_strength(const BrainGraph& graph, std::size_t node);

struct ThalamicSummary {
  double avg_thalamic_strength = 0.0;
  // Mean centrality entry of thalamic nodes on the binarized graph.
  double thalamic_centrality = 0.0;
  double density = 0.0;
  std::size_t n_thalamic = 0;
};

ThalamicSummary thalamic_summary(const BrainGraph& graph, double threshold);

enum class GraphFormat { Dot, Json };

GraphFormat parse_graph_format(std::string_view text);

// DOT: thalamic nodes blue, SOZ nodes red, others grey. Edges with r == 0
// (weighted) or adjacency 0 (binary) are omitted. Node order follows
// graph.nodes.
std::string export_graph(const BrainGraph& graph, GraphFormat format);
std::string export_graph(const BinaryGraph& graph, GraphFormat format);

// Inverse of the JSON export.
struct ParsedGraph {
  std::vector<ChannelInfo> nodes;
  Eigen::MatrixXd adjacency;
  std::optional<double> threshold;
};

ParsedGraph parse_graph_json(std::string_view text);

}  // namespace seegnn
