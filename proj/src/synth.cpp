// SPDX-License-Identifier: Apache-2.0
#include "gdkm/synth.hpp"

#include "gdkm/error.hpp"
#include "gdkm/graph.hpp"
#include "gdkm/rng.hpp"

#include <algorithm>
#include <numeric>

namespace gdkm::synth {

namespace {

dataio::Split split_for(const std::vector<int>& labels, const SplitSizes& s, std::uint64_t seed) {
  const auto n = static_cast<Index>(labels.size());
  int classes = *std::max_element(labels.begin(), labels.end()) + 1;
  const Index rest = n - static_cast<Index>(s.train_per_class) * classes;
  const Index test = s.test > 0 ? s.test : rest - s.val;
  return dataio::stratified_split(labels, s.train_per_class, s.val, test, seed);
}

std::vector<int> balanced_labels(Index n, int classes, std::uint64_t seed) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = static_cast<int>(i % classes);
  Rng rng(seed, Stream::Labels);
  std::shuffle(y.begin(), y.end(), rng.engine());
  return y;
}

}  // namespace

dataio::GraphDataset heterophilous(Index nodes, int classes, Index features, double avg_degree, std::uint64_t seed,
                                   const SplitSizes& sizes) {
  if (classes < 2 || features < classes) fail(ErrorCode::ConfigError, "need classes >= 2 and features >= classes");
  dataio::GraphDataset d;
  d.name = "synthetic-heterophilous";
  d.features = Rng(seed, Stream::Features).normal_matrix(nodes, features);
  d.labels.resize(static_cast<std::size_t>(nodes));
  for (Index i = 0; i < nodes; ++i) {
    Index best = 0;
    d.features.row(i).head(classes).maxCoeff(&best);
    d.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  d.edges = graph::erdos_renyi(nodes, avg_degree / static_cast<double>(nodes - 1), seed);
  d.splits.push_back(split_for(d.labels, sizes, seed));
  d.validate();
  return d;
}

dataio::GraphDataset homophilous(Index nodes, int classes, Index features, double p_in, double p_out,
                                 double signal, std::uint64_t seed, const SplitSizes& sizes) {
  dataio::GraphDataset d;
  d.name = "synthetic-homophilous";
  d.labels = balanced_labels(nodes, classes, seed);
  const Matrix means = Rng(seed, Stream::Features, 1).normal_matrix(classes, features);
  d.features = Rng(seed, Stream::Features).normal_matrix(nodes, features);
  for (Index i = 0; i < nodes; ++i) d.features.row(i) += signal * means.row(d.labels[static_cast<std::size_t>(i)]);
  d.edges = graph::planted_partition(d.labels, p_in, p_out, seed);
  d.splits.push_back(split_for(d.labels, sizes, seed));
  d.validate();
  return d;
}

dataio::GraphDataset er_two_class(Index nodes, double p, Index features, std::uint64_t seed) {
  dataio::GraphDataset d;
  d.name = "synthetic-er";
  d.labels = balanced_labels(nodes, 2, seed);
  d.features = Rng(seed, Stream::Features).normal_matrix(nodes, features > 0 ? features : nodes);
  d.edges = graph::erdos_renyi(nodes, p, seed);
  dataio::Split s;
  s.train.resize(static_cast<std::size_t>(nodes));
  std::iota(s.train.begin(), s.train.end(), Index{0});
  d.splits.push_back(std::move(s));
  d.validate();
  return d;
}

}  // namespace gdkm::synth
