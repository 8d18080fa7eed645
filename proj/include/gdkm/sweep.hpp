// SPDX-License-Identifier: Apache-2.0
//
// Grid over nu x inducing scheme x seed. Cells are independent runs; a cell
// that fails is recorded with its error and the sweep continues.
#pragma once

#include "gdkm/experiment.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gdkm::experiment {

struct SweepRow {
  std::string dataset;
  double nu = 0.0;
  std::string scheme;
  std::uint64_t seed = 0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  bool ok = true;
  std::string error;
};

struct SweepCell {
  double nu = 0.0;
  std::string scheme;
  int runs = 0;    // successful seeds
  int failed = 0;
  double val_mean = 0.0, val_std = 0.0;
  double test_mean = 0.0, test_std = 0.0;
};

struct SweepSummary {
  std::string dataset;
  std::vector<SweepCell> cells;  // grid order: nu outer, scheme inner
  /// Index into cells of the highest mean validation accuracy; -1 if every
  /// cell failed.
  int best = -1;
};

struct SweepGrid {
  std::vector<double> nu;
  std::vector<std::string> schemes;
  std::vector<std::uint64_t> seeds;
};

/// Runs every cell with `base` as the template (nu, scheme and seed
/// replaced). `jobs` > 1 runs cells on that many threads; results are in grid
/// order regardless.
std::vector<SweepRow> sweep_nu(const dataio::GraphDataset& d, const RunConfig& base, const SweepGrid& grid,
                               int jobs = 1);

/// Mean and sample standard deviation (n - 1) over successful seeds.
SweepSummary summarize(const std::vector<SweepRow>& rows);

/// Columns: dataset,nu,scheme,seed,val_acc,test_acc,status.
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
void write_summary_json(const SweepSummary& s, const std::filesystem::path& path);

}  // namespace gdkm::experiment
