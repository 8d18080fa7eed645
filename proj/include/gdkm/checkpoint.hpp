// SPDX-License-Identifier: Apache-2.0
//
// Model checkpoints: matrices in a GDKM bundle file, everything else in a
// JSON sidecar next to it (<path>.json).
#pragma once

#include "gdkm/dkm.hpp"
#include "gdkm/experiment.hpp"

#include <filesystem>
#include <vector>

namespace gdkm::checkpoint {

struct Checkpoint {
  dkm::DkmModel model;
  experiment::RunConfig config;
  std::vector<Index> inducing_nodes;
};

void save(const Checkpoint& c, const std::filesystem::path& path);

/// Throws SchemaError if the sidecar and the bundle disagree.
Checkpoint load(const std::filesystem::path& path);

/// Replaces the freshly initialized model in `p` with the checkpointed one.
/// Throws SchemaError if inducing nodes, feature width or class count differ.
void attach(const Checkpoint& c, experiment::Prepared& p);

}  // namespace gdkm::checkpoint
