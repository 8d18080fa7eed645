// SPDX-License-Identifier: Apache-2.0
//
// Graph construction: edge lists, symmetric normalization with self-loops,
// identity interpolation, homophily, synthetic generators and block-diagonal
// batching of several graphs.
#pragma once

#include "gdkm/numerics.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace gdkm::graph {

struct EdgeList {
  Index num_nodes = 0;
  std::vector<std::pair<Index, Index>> edges;
  bool directed = false;

  /// Undirected, deduplicated copy with u < v and no self-loops.
  /// Throws SchemaError for endpoints outside [0, num_nodes).
  EdgeList canonical() const;
};

enum class AdjacencyScheme { Kipf, LambdaInterp };

/// Symmetric sparse adjacency. For LambdaInterp, lambda is the identity
/// weight; for Kipf it is 0.
struct NormalizedAdjacency {
  SparseMatrix matrix;
  double lambda = 0.0;
  AdjacencyScheme scheme = AdjacencyScheme::Kipf;

  Index size() const { return matrix.rows(); }
  Matrix dense() const { return Matrix(matrix); }
};

/// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
NormalizedAdjacency normalize_kipf(const EdgeList& e);

/// lambda I + (1 - lambda) a.
NormalizedAdjacency interpolate_lambda(const NormalizedAdjacency& a, double lambda);

/// Identity adjacency of the given size (used for fully connected networks).
NormalizedAdjacency identity_adjacency(Index n);

/// Fraction of undirected edges whose endpoints share a label. Throws
/// EmptyGraph if there are no edges.
double edge_homophily(const EdgeList& e, std::span<const int> labels);

/// G(n, p): each unordered pair independently with probability p.
EdgeList erdos_renyi(Index n, double p, std::uint64_t seed);

/// Planted partition: probability p_in within a community, p_out across.
EdgeList planted_partition(std::span<const int> communities, double p_in, double p_out,
                           std::uint64_t seed);

struct GraphSample {
  EdgeList edges;
  Matrix features;
  int label = 0;
};

/// Several graphs stacked into one block-diagonal graph.
struct GraphBatch {
  NormalizedAdjacency adjacency;
  Matrix features;
  std::vector<Index> offsets;  // size = graphs + 1; graph g owns [offsets[g], offsets[g+1])
  std::vector<int> graph_labels;

  Index num_graphs() const { return static_cast<Index>(graph_labels.size()); }
};

GraphBatch batch_graphs(std::span<const GraphSample> graphs);

/// (num_graphs x total_nodes) matrix whose row g averages the nodes of graph g.
SparseMatrix mean_pool_matrix(std::span<const Index> offsets);

}  // namespace gdkm::graph
