#include "seegnn/braingraph.hpp"

#include "seegnn/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace seegnn {

using nlohmann::json;

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::LengthMismatch, "pearson: lengths " + std::to_string(x.size()) +
                                               " and " + std::to_string(y.size()));
  }
  if (x.size() < 2) throw Error(ErrorKind::TooShort, "pearson needs >= 2 samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(std::sqrt(sxx / n) >= kConstantSdThreshold) || !(std::sqrt(syy / n) >= kConstantSdThreshold)) {
    return {0.0, true};
  }
  const double r = sxy / std::sqrt(sxx * syy);
  return {std::clamp(r, -1.0, 1.0), false};
}

BrainGraph correlation_matrix(const FeatureMatrix& features, std::vector<ChannelInfo> nodes) {
  const Eigen::Index n = features.rows();
  if (n < 2) throw Error(ErrorKind::TooFewChannels, "correlation graph needs >= 2 channels");
  if (static_cast<std::size_t>(n) != nodes.size()) {
    throw Error(ErrorKind::ShapeMismatch, "feature rows do not match node count");
  }
  const Eigen::Index len = features.cols();
  if (len < 2) throw Error(ErrorKind::TooShort, "correlation needs >= 2 samples per channel");

  BrainGraph graph;
  graph.nodes = std::move(nodes);
  graph.constant.assign(static_cast<std::size_t>(n), false);

  // Rows centred and scaled to unit norm, so Z Z^T holds every pairwise r.
  FeatureMatrix z = features.colwise() - features.rowwise().mean();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = z.row(i).norm();
    const double sd = norm / std::sqrt(static_cast<double>(len));
    if (!(sd >= kConstantSdThreshold)) {
      graph.constant[static_cast<std::size_t>(i)] = true;
      z.row(i).setZero();
    } else {
      z.row(i) /= norm;
    }
  }
  Eigen::MatrixXd gram = z * z.transpose();
  graph.weights.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    graph.weights(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = std::clamp(gram(i, j), -1.0, 1.0);
      graph.weights(i, j) = r;
      graph.weights(j, i) = r;
    }
  }
  return graph;
}

BrainGraph correlation_matrix(const ProcessedSample& sample) {
  return correlation_matrix(sample.features, sample.channels);
}

BinaryGraph binarize(const BrainGraph& graph, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::InvalidThreshold, "threshold must lie in (0, 1]");
  }
  BinaryGraph out;
  out.nodes = graph.nodes;
  out.threshold = threshold;
  const auto n = static_cast<Eigen::Index>(graph.size());
  out.adjacency = Eigen::MatrixXi::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(graph.weights(i, j)) >= threshold) {
        out.adjacency(i, j) = 1;
        out.adjacency(j, i) = 1;
      }
    }
  }
  return out;
}

std::size_t edge_count(const BinaryGraph& graph) {
  std::size_t edges = 0;
  const auto n = graph.adjacency.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) edges += graph.adjacency(i, j) != 0;
  }
  return edges;
}

double density(const BinaryGraph& graph) {
  const auto n = static_cast<double>(graph.size());
  if (graph.size() < 2) throw Error(ErrorKind::TooFewNodes, "density needs >= 2 nodes");
  return 2.0 * static_cast<double>(edge_count(graph)) / (n * (n - 1.0));
}

Centrality eigenvector_centrality(const Eigen::MatrixXd& a) {
  Centrality out;
  const Eigen::Index n = a.rows();
  out.values = Eigen::VectorXd::Zero(n);
  if (n == 0 || (a.array() == 0.0).all()) {
    out.disconnected_or_empty = true;
    out.converged = true;
    return out;
  }
  // Shift by half the mean row sum, which is at most half the spectral
  // radius, so -lambda_max can never tie with +lambda_max.
  const double shift = 0.5 * a.sum() / static_cast<double>(n);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  Eigen::VectorXd next(n);
  for (int it = 1; it <= kCentralityMaxIterations; ++it) {
    next.noalias() = a * x;
    next += shift * x;
    next /= next.norm();
    const double change = (next - x).norm();
    x.swap(next);
    out.iterations = it;
    if (change < kCentralityTolerance) {
      out.converged = true;
      break;
    }
  }
  out.values = x.cwiseMax(0.0);
  out.values /= out.values.norm();
  return out;
}

Centrality eigenvector_centrality(const BrainGraph& graph) {
  return eigenvector_centrality(Eigen::MatrixXd(graph.weights.cwiseAbs()));
}

Centrality eigenvector_centrality(const BinaryGraph& graph) {
  return eigenvector_centrality(Eigen::MatrixXd(graph.adjacency.cast<double>()));
}

double node_strength(const BrainGraph& graph, std::size_t node) {
  if (node >= graph.size()) {
    throw Error(ErrorKind::IndexOutOfRange, "node " + std::to_string(node) + " of " +
                                                std::to_string(graph.size()));
  }
  const auto v = static_cast<Eigen::Index>(node);
  double sum = 0.0;
  for (Eigen::Index u = 0; u < graph.weights.cols(); ++u) {
    if (u != v) sum += std::abs(graph.weights(v, u));
  }
  return sum;
}

ThalamicSummary thalamic_summary(const BrainGraph& graph, double threshold) {
  std::vector<std::size_t> thalamic;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    if (graph.nodes[i].is_thalamic) thalamic.push_back(i);
  }
  if (thalamic.empty()) throw Error(ErrorKind::NoThalamicNodes, "graph has no thalamic channel");

  const BinaryGraph binary = binarize(graph, threshold);
  const Centrality centrality = eigenvector_centrality(binary);

  ThalamicSummary out;
  out.n_thalamic = thalamic.size();
  for (std::size_t i : thalamic) {
    out.avg_thalamic_strength += node_strength(graph, i);
    out.thalamic_centrality += centrality.values(static_cast<Eigen::Index>(i));
  }
  out.avg_thalamic_strength /= static_cast<double>(thalamic.size());
  out.thalamic_centrality /= static_cast<double>(thalamic.size());
  out.density = graph.size() >= 2 ? density(binary) : 0.0;
  return out;
}

GraphFormat parse_graph_format(std::string_view text) {
  if (text == "dot") return GraphFormat::Dot;
  if (text == "json") return GraphFormat::Json;
  throw Error(ErrorKind::BadFlag, "graph format must be dot or json");
}

// ---------------------------------------------------------------------------
// Export

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

const char* node_color(const ChannelInfo& ch) {
  if (ch.is_thalamic) return "#1f77b4";
  if (ch.is_soz) return "#d62728";
  return "#c7c7c7";
}

json nodes_json(const std::vector<ChannelInfo>& nodes) {
  json out = json::array();
  for (const auto& ch : nodes) {
    out.push_back({{"label", ch.label},
                   {"region", ch.region},
                   {"is_thalamic", ch.is_thalamic},
                   {"is_soz", ch.is_soz}});
  }
  return out;
}

std::string export_impl(const std::vector<ChannelInfo>& nodes, const Eigen::MatrixXd& weights,
                        std::optional<double> threshold, GraphFormat format) {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  if (format == GraphFormat::Json) {
    json edges = json::array();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (weights(i, j) != 0.0) edges.push_back({{"i", i}, {"j", j}, {"r", weights(i, j)}});
      }
    }
    json doc = {{"nodes", nodes_json(nodes)},
                {"edges", std::move(edges)},
                {"threshold", threshold ? json(*threshold) : json(nullptr)}};
    return doc.dump(2) + "\n";
  }

  std::ostringstream out;
  char buf[64];
  out << "graph brain {\n";
  if (threshold) {
    std::snprintf(buf, sizeof buf, "%.6g", *threshold);
    out << "  label=\"threshold " << buf << "\";\n";
  }
  out << "  node [shape=circle, style=filled, fontsize=10];\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ch = nodes[static_cast<std::size_t>(i)];
    out << "  n" << i << " [label=\"" << dot_escape(ch.label) << "\", tooltip=\""
        << dot_escape(ch.region) << "\", fillcolor=\"" << node_color(ch) << "\"];\n";
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = weights(i, j);
      if (r == 0.0) continue;
      std::snprintf(buf, sizeof buf, "%.4f", r);
      char width[32];
      std::snprintf(width, sizeof width, "%.3f", 0.5 + 3.0 * std::abs(r));
      out << "  n" << i << " -- n" << j << " [label=\"" << buf << "\", penwidth=" << width
          << (r < 0 ? ", style=dashed" : "") << "];\n";
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace

std::string export_graph(const BrainGraph& graph, GraphFormat format) {
  return export_impl(graph.nodes, graph.weights, std::nullopt, format);
}

std::string export_graph(const BinaryGraph& graph, GraphFormat format) {
  return export_impl(graph.nodes, graph.adjacency.cast<double>(), graph.threshold, format);
}

ParsedGraph parse_graph_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaViolation, std::string("graph JSON: ") + e.what());
  }
  ParsedGraph out;
  try {
    for (const auto& node : doc.at("nodes")) {
      out.nodes.push_back({node.at("label").get<std::string>(), node.at("region").get<std::string>(),
                           node.at("is_thalamic").get<bool>(), node.at("is_soz").get<bool>()});
    }
    const auto n = static_cast<Eigen::Index>(out.nodes.size());
    out.adjacency = Eigen::MatrixXd::Zero(n, n);
    for (const auto& edge : doc.at("edges")) {
      const auto i = edge.at("i").get<Eigen::Index>();
      const auto j = edge.at("j").get<Eigen::Index>();
      if (i < 0 || j < 0 || i >= n || j >= n || i == j) {
        throw Error(ErrorKind::SchemaViolation, "graph JSON: edge index out of range");
      }
      out.adjacency(i, j) = edge.at("r").get<double>();
      out.adjacency(j, i) = out.adjacency(i, j);
    }
    if (const auto& t = doc.at("threshold"); !t.is_null()) out.threshold = t.get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaViolation, std::string("graph JSON: ") + e.what());
  }
  return out;
}

}  // namespace seegnn
