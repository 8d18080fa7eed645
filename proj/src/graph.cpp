// SPDX-License-Identifier: Apache-2.0
#include "gdkm/graph.hpp"

#include "gdkm/error.hpp"
#include "gdkm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gdkm::graph {

EdgeList EdgeList::canonical() const {
  EdgeList out;
  out.num_nodes = num_nodes;
  out.directed = false;
  out.edges.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes) {
      fail(ErrorCode::SchemaError, "edge (" + std::to_string(u) + ", " + std::to_string(v) +
                                       ") outside node range " + std::to_string(num_nodes));
    }
    if (u == v) continue;
    out.edges.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(out.edges.begin(), out.edges.end());
  out.edges.erase(std::unique(out.edges.begin(), out.edges.end()), out.edges.end());
  return out;
}

NormalizedAdjacency normalize_kipf(const EdgeList& e) {
  const EdgeList c = e.canonical();
  const Index n = c.num_nodes;
  Vector degree = Vector::Ones(n);  // self-loop
  for (auto [u, v] : c.edges) {
    degree(u) += 1.0;
    degree(v) += 1.0;
  }
  const Vector inv_sqrt = degree.array().rsqrt();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * c.edges.size() + static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) triplets.emplace_back(k, k, inv_sqrt(k) * inv_sqrt(k));
  for (auto [u, v] : c.edges) {
    const double w = inv_sqrt(u) * inv_sqrt(v);
    triplets.emplace_back(u, v, w);
    triplets.emplace_back(v, u, w);
  }
  NormalizedAdjacency out;
  out.matrix.resize(n, n);
  out.matrix.setFromTriplets(triplets.begin(), triplets.end());
  out.matrix.makeCompressed();
  out.scheme = AdjacencyScheme::Kipf;
  out.lambda = 0.0;
  return out;
}

NormalizedAdjacency interpolate_lambda(const NormalizedAdjacency& a, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) {
    fail(ErrorCode::ConfigError, "lambda must lie in [0, 1]");
  }
  SparseMatrix eye(a.size(), a.size());
  eye.setIdentity();
  NormalizedAdjacency out;
  out.matrix = lambda * eye + (1.0 - lambda) * a.matrix;
  out.matrix.prune(0.0);
  out.matrix.makeCompressed();
  out.lambda = lambda;
  out.scheme = AdjacencyScheme::LambdaInterp;
  return out;
}

NormalizedAdjacency identity_adjacency(Index n) {
  NormalizedAdjacency out;
  out.matrix.resize(n, n);
  out.matrix.setIdentity();
  out.scheme = AdjacencyScheme::LambdaInterp;
  out.lambda = 1.0;
  return out;
}

double edge_homophily(const EdgeList& e, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) < e.num_nodes) {
    fail(ErrorCode::SchemaError, "labels do not cover every node");
  }
  const EdgeList c = e.canonical();
  if (c.edges.empty()) fail(ErrorCode::EmptyGraph, "graph has no edges");
  std::size_t same = 0;
  for (auto [u, v] : c.edges) {
    if (labels[static_cast<std::size_t>(u)] == labels[static_cast<std::size_t>(v)]) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(c.edges.size());
}

EdgeList erdos_renyi(Index n, double p, std::uint64_t seed) {
  if (n < 1) fail(ErrorCode::ConfigError, "erdos_renyi needs at least one node");
  if (p < 0.0 || p > 1.0) fail(ErrorCode::ConfigError, "edge probability must lie in [0, 1]");
  Rng rng(seed, Stream::Graph);
  EdgeList out;
  out.num_nodes = n;
  for (Index u = 0; u < n; ++u) {
    for (Index v = u + 1; v < n; ++v) {
      if (rng.bernoulli(p)) out.edges.emplace_back(u, v);
    }
  }
  return out;
}

EdgeList planted_partition(std::span<const int> communities, double p_in, double p_out,
                           std::uint64_t seed) {
  Rng rng(seed, Stream::Graph);
  EdgeList out;
  out.num_nodes = static_cast<Index>(communities.size());
  for (Index u = 0; u < out.num_nodes; ++u) {
    for (Index v = u + 1; v < out.num_nodes; ++v) {
      const bool same = communities[static_cast<std::size_t>(u)] == communities[static_cast<std::size_t>(v)];
      if (rng.bernoulli(same ? p_in : p_out)) out.edges.emplace_back(u, v);
    }
  }
  return out;
}

GraphBatch batch_graphs(std::span<const GraphSample> graphs) {
  GraphBatch out;
  out.offsets.push_back(0);
  Index total = 0;
  Index feature_dim = -1;
  for (const auto& g : graphs) {
    if (g.features.rows() != g.edges.num_nodes) {
      fail(ErrorCode::SchemaError, "feature rows do not match node count");
    }
    if (feature_dim >= 0 && g.features.cols() != feature_dim) {
      fail(ErrorCode::SchemaError, "inconsistent feature dimension across graphs");
    }
    feature_dim = g.features.cols();
    total += g.edges.num_nodes;
    out.offsets.push_back(total);
    out.graph_labels.push_back(g.label);
  }
  EdgeList merged;
  merged.num_nodes = total;
  out.features = Matrix(total, std::max<Index>(feature_dim, 0));
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const Index base = out.offsets[g];
    for (auto [u, v] : graphs[g].edges.edges) merged.edges.emplace_back(u + base, v + base);
    if (graphs[g].edges.num_nodes > 0) {
      out.features.middleRows(base, graphs[g].edges.num_nodes) = graphs[g].features;
    }
  }
  out.adjacency = normalize_kipf(merged);
  return out;
}

SparseMatrix mean_pool_matrix(std::span<const Index> offsets) {
  const Index graphs = static_cast<Index>(offsets.size()) - 1;
  const Index nodes = offsets.empty() ? 0 : offsets.back();
  std::vector<Eigen::Triplet<double>> triplets;
  for (Index g = 0; g < graphs; ++g) {
    const Index begin = offsets[static_cast<std::size_t>(g)];
    const Index end = offsets[static_cast<std::size_t>(g) + 1];
    const double w = end > begin ? 1.0 / static_cast<double>(end - begin) : 0.0;
    for (Index k = begin; k < end; ++k) triplets.emplace_back(g, k, w);
  }
  SparseMatrix pool(graphs, nodes);
  pool.setFromTriplets(triplets.begin(), triplets.end());
  return pool;
}

}  // namespace gdkm::graph
