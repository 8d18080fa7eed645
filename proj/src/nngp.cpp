// SPDX-License-Identifier: Apache-2.0
#include "gdkm/nngp.hpp"

#include "gdkm/error.hpp"

namespace gdkm::nngp {

Matrix input_gram(const Matrix& x, double input_scale) {
  return numerics::symmetrize(input_scale * (x * x.transpose()));
}

std::vector<Matrix> nngp_forward(const Matrix& x_gram, const NngpConfig& cfg) {
  if (cfg.depth < 1) fail(ErrorCode::ConfigError, "depth must be at least 1");
  numerics::require_square(x_gram, "nngp_forward");
  if (cfg.adjacency.size() != x_gram.rows()) {
    fail(ErrorCode::DimensionMismatch, "adjacency and Gram sizes differ");
  }
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(cfg.depth));
  Matrix g = x_gram;
  for (int l = 1; l <= cfg.depth; ++l) {
    g = kernels::graph_conv(kernels::apply_kernel(cfg.base_kernel, g), cfg.adjacency);
    out.push_back(g);
  }
  return out;
}

std::vector<kernels::BlockGram> nngp_forward_sparse(const Matrix& x_i, const Matrix& x_t,
                                                    const NngpConfig& cfg,
                                                    const kernels::BlockAdjacency& a) {
  if (cfg.depth < 1) fail(ErrorCode::ConfigError, "depth must be at least 1");
  if (x_i.cols() != x_t.cols()) fail(ErrorCode::DimensionMismatch, "inducing and test feature widths differ");
  kernels::BlockGram g;
  g.ii = input_gram(x_i, cfg.input_scale);
  g.ti = cfg.input_scale * (x_t * x_i.transpose());
  g.tt = input_gram(x_t, cfg.input_scale);
  g.tt_diag = g.tt->diagonal();
  std::vector<kernels::BlockGram> out;
  out.reserve(static_cast<std::size_t>(cfg.depth));
  for (int l = 1; l <= cfg.depth; ++l) {
    g = kernels::graph_conv_block(kernels::apply_kernel(cfg.base_kernel, g), a);
    out.push_back(g);
  }
  return out;
}

}  // namespace gdkm::nngp
