// SPDX-License-Identifier: Apache-2.0
//
// Run configuration and the glue from a dataset directory to a trained,
// evaluated model. Shared by the command-line tool, the sweep and the tests.
#pragma once

#include "gdkm/dataio.hpp"
#include "gdkm/dkm.hpp"
#include "gdkm/train.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace gdkm::experiment {

struct RunConfig {
  std::string dataset;            // directory in the dataio layout
  std::string output = "out";
  std::uint64_t seed = 0;
  int fold = 0;
  std::string feature_scale = "sumsq";  // sumsq | norm | none

  int depth = 2;
  std::vector<double> nu{1.0};    // one value (broadcast) or one per layer; "inf" freezes a layer
  std::string kernel = "arccos";  // arccos | linear
  std::string adjacency = "kipf"; // kipf | lambda
  double lambda = 0.0;
  std::string scheme = "inter";   // inter | intra
  int num_inducing = 100;
  std::string gtt = "nystrom";    // nystrom | exact
  double input_scale = 0.0;       // 0 means 1 / nu_0
  bool centering = false;
  bool learn_affine = false;

  int epochs = 300;
  int mc_train = 1;
  int mc_eval = 16;
  double lr_base = 1e-3;
  double lr_peak = 1e-2;
  double lr_floor = 1e-5;
  double warm_fraction = 0.25;
  double clip_norm = 100.0;
  double min_diag = 1e-6;
};

struct ConfigKey {
  const char* name;
  const char* type;  // "string", "int", "number", "bool", "nu"
  const char* help;
};

/// Every accepted config key, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Throws ConfigError on unknown keys, wrong types or out-of-range values.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
/// Range checks only; config_from_json already calls it.
void validate(const RunConfig& c);

/// "inf" / "infinity" / numbers, as accepted in the nu key.
double parse_nu(const nlohmann::json& v);
nlohmann::json nu_to_json(double nu);

struct Prepared {
  dkm::DkmModel model;
  train::TrainData data;
  graph::NormalizedAdjacency adjacency;
  int num_classes = 0;
};

/// Scales features, builds the adjacency and inducing scheme, samples the
/// inducing nodes and initializes the model at the NNGP point.
Prepared prepare(const dataio::GraphDataset& d, const RunConfig& c);

train::FitOptions fit_options(const RunConfig& c);

struct Evaluation {
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  std::vector<double> per_class_test_acc;
  /// CKA between the top-layer kernel (Nystrom reconstruction, test items)
  /// and the one-hot label kernel.
  double top_cka = 0.0;
};

Evaluation evaluate(const dkm::DkmModel& model, const train::TrainData& data, int num_classes, int mc_samples,
                    std::uint64_t seed);

struct RunResult {
  train::FitResult fit;
  Evaluation eval;
};

RunResult run(const dataio::GraphDataset& d, const RunConfig& c,
              const std::function<void(const train::EpochMetrics&)>& on_epoch = {});

}  // namespace gdkm::experiment
