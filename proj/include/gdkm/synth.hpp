// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic node-classification datasets.
#pragma once

#include "gdkm/dataio.hpp"

#include <cstdint>

namespace gdkm::synth {

struct SplitSizes {
  int train_per_class = 20;
  Index val = 100;
  Index test = 0;  // 0 means every remaining node
};

/// Erdos-Renyi structure independent of the labels; each label is the argmax
/// of the first `classes` feature columns, so the graph carries no label
/// signal and neighbor averaging blurs it.
dataio::GraphDataset heterophilous(Index nodes, int classes, Index features, double avg_degree, std::uint64_t seed,
                                   const SplitSizes& sizes = {});

/// Planted partition whose communities are the classes; features are a
/// class mean plus unit Gaussian noise with the given signal strength.
dataio::GraphDataset homophilous(Index nodes, int classes, Index features, double p_in, double p_out,
                                 double signal, std::uint64_t seed, const SplitSizes& sizes = {});

/// Erdos-Renyi graph with two balanced classes and Gaussian features (one
/// column per node by default, so X X^T is full rank). Every node is labelled
/// and lands in the training split.
dataio::GraphDataset er_two_class(Index nodes, double p, Index features, std::uint64_t seed);

}  // namespace gdkm::synth
