// SPDX-License-Identifier: Apache-2.0
#include "gdkm/checkpoint.hpp"

#include "gdkm/dataio.hpp"
#include "gdkm/error.hpp"

#include <json.hpp>

#include <fstream>

namespace gdkm::checkpoint {

using nlohmann::json;

namespace {

std::filesystem::path sidecar(const std::filesystem::path& p) { return p.string() + ".json"; }

}  // namespace

void save(const Checkpoint& c, const std::filesystem::path& path) {
  const auto& m = c.model;
  m.validate();
  std::vector<Matrix> ms{m.inducing_inputs, m.head.mu, m.head.sigma_chol};
  ms.insert(ms.end(), m.layer_params.begin(), m.layer_params.end());
  dataio::save_matrices(ms, path);

  json nu = json::array();
  for (double v : m.nu) nu.push_back(experiment::nu_to_json(v));
  json centering = json::array();
  for (const auto& cp : m.centering) {
    centering.push_back({{"enabled", cp.enabled}, {"learn_affine", cp.learn_affine}, {"gamma", cp.gamma}, {"beta", cp.beta}});
  }
  json j = {
      {"format", "gdkm-checkpoint"},
      {"version", 1},
      {"depth", m.depth},
      {"nu", nu},
      {"kernel", m.base_kernel == kernels::BaseKernel::Linear ? "linear" : "arccos"},
      {"gtt", m.gtt_mode == dkm::GttMode::Exact ? "exact" : "nystrom"},
      {"input_scale", m.input_scale},
      {"mc_samples", m.head.mc_samples},
      {"num_inducing", m.num_inducing()},
      {"num_features", m.inducing_inputs.cols()},
      {"num_classes", m.num_classes()},
      {"centering", centering},
      {"inducing_nodes", c.inducing_nodes},
      {"config", experiment::config_to_json(c.config)},
  };
  std::ofstream out(sidecar(path));
  if (!out) fail(ErrorCode::IoError, "cannot write " + sidecar(path).string());
  out << j.dump(2) << '\n';
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(sidecar(path));
  if (!in) fail(ErrorCode::IoError, "cannot open " + sidecar(path).string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, sidecar(path).filename().string() + ": " + e.what());
  }
  Checkpoint c;
  try {
    if (j.at("format") != "gdkm-checkpoint") fail(ErrorCode::SchemaError, "not a checkpoint sidecar");
    auto& m = c.model;
    m.depth = j.at("depth").get<int>();
    for (const auto& v : j.at("nu")) m.nu.push_back(experiment::parse_nu(v));
    m.base_kernel = j.at("kernel") == "linear" ? kernels::BaseKernel::Linear : kernels::BaseKernel::Arccos;
    m.gtt_mode = j.at("gtt") == "exact" ? dkm::GttMode::Exact : dkm::GttMode::Nystrom;
    m.input_scale = j.at("input_scale").get<double>();
    m.head.mc_samples = j.at("mc_samples").get<int>();
    for (const auto& cp : j.at("centering")) {
      m.centering.push_back({cp.at("enabled").get<bool>(), cp.at("learn_affine").get<bool>(),
                             cp.at("gamma").get<double>(), cp.at("beta").get<double>()});
    }
    c.inducing_nodes = j.at("inducing_nodes").get<std::vector<Index>>();
    c.config = experiment::config_from_json(j.at("config"));
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaError, sidecar(path).filename().string() + ": " + e.what());
  }
  auto ms = dataio::load_matrices(path);
  auto& m = c.model;
  if (m.depth < 1 || ms.size() != 3 + static_cast<std::size_t>(m.depth)) {
    fail(ErrorCode::SchemaError, "checkpoint holds " + std::to_string(ms.size()) + " matrices for depth " +
                                     std::to_string(m.depth));
  }
  m.inducing_inputs = std::move(ms[0]);
  m.head.mu = std::move(ms[1]);
  m.head.sigma_chol = std::move(ms[2]);
  m.layer_params.assign(std::make_move_iterator(ms.begin() + 3), std::make_move_iterator(ms.end()));
  if (m.num_inducing() != j.at("num_inducing").get<Index>() || m.inducing_inputs.cols() != j.at("num_features").get<Index>() ||
      m.num_classes() != j.at("num_classes").get<Index>() ||
      static_cast<Index>(c.inducing_nodes.size()) != m.num_inducing()) {
    fail(ErrorCode::SchemaError, "checkpoint sidecar disagrees with stored matrices");
  }
  m.validate();
  return c;
}

void attach(const Checkpoint& c, experiment::Prepared& p) {
  if (c.inducing_nodes != p.data.scheme.nodes) {
    fail(ErrorCode::SchemaError, "checkpoint inducing nodes differ from the dataset's scheme");
  }
  if (c.model.inducing_inputs.cols() != p.data.features.cols()) {
    fail(ErrorCode::SchemaError, "checkpoint expects " + std::to_string(c.model.inducing_inputs.cols()) +
                                     " features, dataset has " + std::to_string(p.data.features.cols()));
  }
  if (c.model.num_classes() != p.num_classes) {
    fail(ErrorCode::SchemaError, "checkpoint has " + std::to_string(c.model.num_classes()) + " classes, dataset has " +
                                     std::to_string(p.num_classes));
  }
  p.model = c.model;
}

}  // namespace gdkm::checkpoint
