// SPDX-License-Identifier: Apache-2.0
//
// Optimization: learning-rate schedules, Adam, gradient evaluation through
// the tape, and the full-batch training loop for the sparse model.
#pragma once

#include "gdkm/autodiff.hpp"
#include "gdkm/dkm.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace gdkm::train {

/// Linear warm-up from base to peak over the first warm_fraction of the
/// epochs, then cosine decay from peak to floor at total_epochs.
struct LrSchedule {
  double base = 1e-3;
  double peak = 1e-2;
  double floor = 1e-5;
  int total_epochs = 300;
  double warm_fraction = 0.25;

  double at(double epoch) const;
};

/// init * (1 - epoch / total)^power.
struct PolynomialSchedule {
  double init = 0.1;
  double power = 0.7;
  int total_epochs = 10000;

  double at(double epoch) const;
};

struct Schedule {
  enum class Kind { WarmupCosine, Polynomial } kind = Kind::WarmupCosine;
  LrSchedule warmup_cosine;
  PolynomialSchedule polynomial;

  double at(double epoch) const {
    return kind == Kind::WarmupCosine ? warmup_cosine.at(epoch) : polynomial.at(epoch);
  }
};

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// One ascent step (maximize = true) or descent step on each parameter.
  void step(std::span<Matrix* const> params, std::span<const Matrix> grads, double lr, bool maximize);

  int steps() const { return step_; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double eps() const { return eps_; }

 private:
  double beta1_, beta2_, eps_;
  int step_ = 0;
  std::vector<Matrix> m_, v_;
};

struct GradResult {
  double value = 0.0;
  std::vector<Matrix> grads;
};

using TapeObjective = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>;

/// Value and reverse-mode gradient of a scalar objective. Throws
/// NonFiniteGradient if any gradient entry is not finite.
GradResult grad(const TapeObjective& objective, std::span<const Matrix> params);

/// Rescales grads in place so their joint Frobenius norm is at most max_norm;
/// returns the norm before clipping.
double clip_global_norm(std::span<Matrix> grads, double max_norm);

/// Everything the sparse model needs from a dataset.
struct TrainData {
  Matrix features;  // all nodes, already scaled
  dkm::InducingScheme scheme;
  dkm::Targets train;
  dkm::Targets val;
  dkm::Targets test;
};

struct EpochMetrics {
  int epoch = 0;
  double objective = 0.0;
  double loglik = 0.0;
  double weight_kl = 0.0;
  std::vector<double> kl_layers;
  double lr = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double grad_norm = 0.0;
  bool clipped = false;
  double wall_ms = 0.0;
};

std::string to_json_line(const EpochMetrics& m);

struct FitOptions {
  int epochs = 300;
  Schedule schedule;
  std::uint64_t seed = 0;
  double clip_norm = 100.0;
  double min_diag = 1e-6;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct FitResult {
  dkm::DkmModel model;  // last parameters with a finite objective
  std::vector<EpochMetrics> metrics;
  bool diverged = false;
  std::string failure;
};

/// Full-batch Adam ascent on the sparse objective. Epoch e evaluates the
/// objective at the current parameters and then (for e < epochs) takes one
/// step, so the log has epochs + 1 records. Divergence stops training and
/// returns the last good model.
FitResult fit(const dkm::DkmModel& model, const TrainData& data, const FitOptions& opts);

/// Fraction of rows whose argmax matches the label.
double accuracy(const Matrix& scores, std::span<const Index> rows, std::span<const int> labels);

/// Monte-Carlo class probabilities for every node (node task) or graph.
Matrix predict(const dkm::DkmModel& model, const TrainData& data, int mc_samples, std::uint64_t seed);

}  // namespace gdkm::train
