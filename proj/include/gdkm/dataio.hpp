// SPDX-License-Identifier: Apache-2.0
//
// Dataset directories, feature scaling, splits and binary kernel files.
//
// Dataset layout:
//   features.csv   P rows of comma-separated reals
//   edges.txt      one "u v" pair per line, 0-indexed; '#' starts a comment
//   labels.csv     one integer per node, or "graph_id,label" rows (graph task)
//   splits.json    {"train":[...],"val":[...],"test":[...]} or a list of such folds
//   graph_id.csv   optional, one graph id per node; its presence selects the graph task
#pragma once

#include "gdkm/graph.hpp"
#include "gdkm/kernels.hpp"
#include "gdkm/numerics.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gdkm::dataio {

enum class TaskKind { Node, Graph };

struct Split {
  std::vector<Index> train, val, test;
};

struct GraphDataset {
  std::string name;
  TaskKind task = TaskKind::Node;
  Matrix features;                 // P x nu_0
  graph::EdgeList edges;           // over all P nodes
  std::vector<int> labels;         // per node (node task) or per graph (graph task)
  std::vector<Index> graph_id;     // graph task only, per node, non-decreasing
  std::vector<Split> splits;       // one entry, or one per fold

  Index num_nodes() const { return features.rows(); }
  int num_classes() const;
  Index num_graphs() const;
  /// Node offsets of each graph, size num_graphs() + 1.
  std::vector<Index> graph_offsets() const;

  /// Throws SchemaError on any violated invariant.
  void validate() const;
};

GraphDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const GraphDataset& d, const std::filesystem::path& dir);

enum class ScaleMode { None, SumSquares, Norm };

/// Divides each row by its sum of squares (SumSquares) or by its Euclidean
/// norm (Norm). All-zero rows are left unchanged.
Matrix scale_features(const Matrix& x, ScaleMode mode = ScaleMode::SumSquares);

/// Stratified k-fold over graph labels: fold f tests on its own slice,
/// validates on the next fold's slice and trains on the rest.
std::vector<Split> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

/// Random stratified split with the given number of training items per class
/// and fixed validation / test sizes.
Split stratified_split(std::span<const int> labels, int train_per_class, Index val_size, Index test_size,
                       std::uint64_t seed);

// ---------------------------------------------------------------------------
// Kernel files: "GDKM", u32 version, u32 rows, u32 cols, little-endian f64
// payload in row-major order, u64 FNV-1a checksum over everything before it.
// Version 2 stores a BlockGram as four consecutive matrices (ii, ti, tt_diag,
// tt; the last may be 0 x 0).
// Version 3 stores a counted list of matrices (model checkpoints).

inline constexpr std::uint32_t kKernelVersion = 1;
inline constexpr std::uint32_t kBlockGramVersion = 2;
inline constexpr std::uint32_t kBundleVersion = 3;

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ULL);

void save_kernel(const Matrix& k, const std::filesystem::path& path);
Matrix load_kernel(const std::filesystem::path& path);

void save_block_gram(const kernels::BlockGram& k, const std::filesystem::path& path);
kernels::BlockGram load_block_gram(const std::filesystem::path& path);

/// Version 3: u32 count followed by that many matrices.
void save_matrices(std::span<const Matrix> ms, const std::filesystem::path& path);
std::vector<Matrix> load_matrices(const std::filesystem::path& path);

/// Writes a matrix as CSV with full round-trip precision.
void write_csv(const Matrix& m, const std::filesystem::path& path);

}  // namespace gdkm::dataio
