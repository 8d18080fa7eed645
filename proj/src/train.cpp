// SPDX-License-Identifier: Apache-2.0
#include "gdkm/train.hpp"

#include "gdkm/error.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <numbers>

namespace gdkm::train {

double LrSchedule::at(double epoch) const {
  const double total = static_cast<double>(total_epochs);
  const double warm = warm_fraction * total;
  if (total <= 0.0) return base;
  if (epoch <= warm) {
    return warm > 0.0 ? base + (peak - base) * epoch / warm : peak;
  }
  const double span = total - warm;
  const double t = std::min(1.0, (epoch - warm) / span);
  return floor + (peak - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

double PolynomialSchedule::at(double epoch) const {
  if (total_epochs <= 0) return init;
  const double t = std::clamp(epoch / static_cast<double>(total_epochs), 0.0, 1.0);
  return init * std::pow(1.0 - t, power);
}

void Adam::step(std::span<Matrix* const> params, std::span<const Matrix> grads, double lr, bool maximize) {
  if (params.size() != grads.size()) fail(ErrorCode::DimensionMismatch, "one gradient per parameter expected");
  if (m_.empty()) {
    for (Matrix* p : params) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (m_.size() != params.size()) fail(ErrorCode::DimensionMismatch, "parameter list changed between steps");
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, step_);
  const double c2 = 1.0 - std::pow(beta2_, step_);
  const double sign = maximize ? 1.0 : -1.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix& g = grads[k];
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g.cwiseAbs2();
    const Matrix m_hat = m_[k] / c1;
    const Matrix v_hat = v_[k] / c2;
    *params[k] += sign * lr * (m_hat.array() / (v_hat.array().sqrt() + eps_)).matrix();
  }
}

GradResult grad(const TapeObjective& objective, std::span<const Matrix> params) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.leaf(p));
  const ad::Var out = objective(tape, leaves);
  tape.backward(out);
  GradResult r;
  r.value = out.scalar();
  for (const auto& leaf : leaves) {
    r.grads.push_back(tape.grad(leaf));
    if (!r.grads.back().allFinite()) fail(ErrorCode::NonFiniteGradient, "gradient has non-finite entries");
  }
  return r;
}

double clip_global_norm(std::span<Matrix> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    for (auto& g : grads) g *= max_norm / norm;
  }
  return norm;
}

std::string to_json_line(const EpochMetrics& m) {
  nlohmann::json j;
  j["epoch"] = m.epoch;
  j["objective"] = m.objective;
  j["loglik"] = m.loglik;
  j["weight_kl"] = m.weight_kl;
  j["kl_layers"] = m.kl_layers;
  j["lr"] = m.lr;
  j["train_acc"] = m.train_acc;
  j["val_acc"] = m.val_acc;
  j["grad_norm"] = m.grad_norm;
  j["clipped"] = m.clipped;
  j["wall_ms"] = m.wall_ms;
  return j.dump();
}

double accuracy(const Matrix& scores, std::span<const Index> rows, std::span<const int> labels) {
  if (rows.size() != labels.size()) fail(ErrorCode::DimensionMismatch, "rows and labels differ in length");
  if (rows.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    Index best = 0;
    scores.row(rows[k]).maxCoeff(&best);
    if (best == labels[k]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

Matrix predict(const dkm::DkmModel& model, const TrainData& data, int mc_samples, std::uint64_t seed) {
  const SparseMatrix& pool = data.train.task == dkm::Task::Graph ? data.train.pool : SparseMatrix();
  return dkm::predict_proba(model, data.features, data.scheme, mc_samples, seed, pool);
}

namespace {

struct Slot {
  Matrix* param;
  ad::Var var;
  bool lower;  // keep lower-triangular with a positive diagonal
  double* scalar = nullptr;  // written back from *param after the step
};

Matrix lower_part(const Matrix& m) { return m.triangularView<Eigen::Lower>(); }

}  // namespace

FitResult fit(const dkm::DkmModel& initial, const TrainData& data, const FitOptions& opts) {
  if (opts.epochs < 0) fail(ErrorCode::ConfigError, "epochs must be non-negative");
  FitResult result;
  dkm::DkmModel model = initial;
  result.model = model;
  const dkm::InputBlocks inputs = dkm::make_input_blocks(model, data.features, data.scheme);
  const bool graph_task = data.train.task == dkm::Task::Graph;
  Adam adam;
  for (int epoch = 0; epoch <= opts.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    ad::Tape tape;
    const dkm::TapeParams params = dkm::bind_params(tape, model, true);
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = opts.schedule.at(epoch);
    dkm::ObjectiveTerms terms;
    try {
      const auto offset = static_cast<std::uint64_t>(epoch) * static_cast<std::uint64_t>(model.head.mc_samples);
      terms = dkm::sparse_objective(tape, model, params, inputs, data.scheme, data.train, opts.seed, offset);
    } catch (const Error& e) {
      if (family_of(e.code()) != ErrorFamily::Numeric) throw;
      result.diverged = true;
      result.failure = e.what();
      break;
    }
    m.objective = terms.total.scalar();
    if (!std::isfinite(m.objective)) {
      result.diverged = true;
      result.failure = "objective is not finite at epoch " + std::to_string(epoch);
      break;
    }
    result.model = model;
    m.loglik = terms.expected_loglik.scalar();
    m.weight_kl = terms.weight_kl.scalar();
    for (const auto& kl : terms.layer_kl) m.kl_layers.push_back(kl.scalar());

    Matrix scores = terms.forward.top_q.value() * model.head.mu;
    if (graph_task) scores = data.train.pool * scores;
    m.train_acc = accuracy(scores, data.train.rows, data.train.labels);
    m.val_acc = accuracy(scores, data.val.rows, data.val.labels);

    if (epoch < opts.epochs) {
      tape.backward(terms.total);
      std::vector<Slot> slots;
      std::deque<Matrix> affine;
      for (int l = 0; l < model.depth; ++l) {
        const auto k = static_cast<std::size_t>(l);
        if (!model.frozen(l)) slots.push_back({&model.layer_params[k], params.layer[k], true});
        if (params.gamma[k].valid() && tape.requires_grad(params.gamma[k])) {
          affine.push_back(Matrix::Constant(1, 1, model.centering[k].gamma));
          slots.push_back({&affine.back(), params.gamma[k], false, &model.centering[k].gamma});
          affine.push_back(Matrix::Constant(1, 1, model.centering[k].beta));
          slots.push_back({&affine.back(), params.beta[k], false, &model.centering[k].beta});
        }
      }
      slots.push_back({&model.head.mu, params.mu, false});
      slots.push_back({&model.head.sigma_chol, params.sigma_chol, true});

      std::vector<Matrix> grads;
      std::vector<Matrix*> ptrs;
      bool finite = true;
      for (const auto& s : slots) {
        Matrix g = tape.grad(s.var);
        if (s.lower) g = lower_part(g);
        finite = finite && g.allFinite();
        grads.push_back(std::move(g));
      }
      if (!finite) {
        result.diverged = true;
        result.failure = "non-finite gradient at epoch " + std::to_string(epoch);
        m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        result.metrics.push_back(m);
        if (opts.on_epoch) opts.on_epoch(m);
        break;
      }
      m.grad_norm = clip_global_norm(grads, opts.clip_norm);
      m.clipped = m.grad_norm > opts.clip_norm;
      if (m.clipped) spdlog::debug("epoch {}: gradient norm {:.3g} clipped to {}", epoch, m.grad_norm, opts.clip_norm);
      for (const auto& s : slots) ptrs.push_back(s.param);
      adam.step(ptrs, grads, m.lr, true);
      for (const auto& s : slots) {
        if (s.scalar) *s.scalar = (*s.param)(0, 0);
        if (!s.lower) continue;
        *s.param = lower_part(*s.param);
        s.param->diagonal() = s.param->diagonal().cwiseMax(opts.min_diag);
      }
    }
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.metrics.push_back(m);
    if (opts.on_epoch) opts.on_epoch(m);
  }
  if (result.diverged) spdlog::warn("training stopped: {}", result.failure);
  return result;
}

}  // namespace gdkm::train
