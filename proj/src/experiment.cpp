// SPDX-License-Identifier: Apache-2.0
#include "gdkm/experiment.hpp"

#include "gdkm/error.hpp"
#include "gdkm/kernels.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace gdkm::experiment {

using nlohmann::json;

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"dataset", "string", "dataset directory (features.csv, edges.txt, labels.csv, splits.json)"},
      {"output", "string", "output directory"},
      {"seed", "int", "master seed for every random stream"},
      {"fold", "int", "which split of splits.json to use"},
      {"feature_scale", "string", "row scaling of features: sumsq | norm | none"},
      {"depth", "int", "number of Gram layers L"},
      {"nu", "nu", "KL weight per layer: a number, \"inf\", or a list with one entry per layer"},
      {"kernel", "string", "base kernel: arccos | linear"},
      {"adjacency", "string", "adjacency: kipf | lambda (lambda I + (1 - lambda) A)"},
      {"lambda", "number", "identity weight for the lambda adjacency, in [0, 1]"},
      {"scheme", "string", "inducing points: inter (disconnected) | intra (graph nodes)"},
      {"num_inducing", "int", "number of inducing points (capped at the node count)"},
      {"gtt", "string", "test-test block: nystrom | exact"},
      {"input_scale", "number", "G0 = input_scale X X^T; 0 selects 1 / number of features"},
      {"centering", "bool", "center features after each Gram layer"},
      {"learn_affine", "bool", "learn the scale and offset of the centering layer"},
      {"epochs", "int", "full-batch training steps"},
      {"mc_train", "int", "Monte-Carlo weight samples per training step"},
      {"mc_eval", "int", "Monte-Carlo weight samples at evaluation"},
      {"lr_base", "number", "learning rate at epoch 0"},
      {"lr_peak", "number", "learning rate at the end of warm-up"},
      {"lr_floor", "number", "learning rate at the last epoch"},
      {"warm_fraction", "number", "fraction of epochs spent warming up"},
      {"clip_norm", "number", "global gradient-norm clip"},
      {"min_diag", "number", "lower bound on Cholesky-parameter diagonals after each step"},
  };
  return keys;
}

double parse_nu(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (s == "inf" || s == "infinity") return dkm::kInfiniteNu;
    try {
      std::size_t used = 0;
      const double x = std::stod(s, &used);
      if (used == s.size()) return x;
    } catch (const std::exception&) {
    }
  }
  fail(ErrorCode::ConfigError, "nu must be a number or \"inf\", got " + v.dump());
}

json nu_to_json(double nu) { return dkm::is_infinite(nu) ? json("inf") : json(nu); }

namespace {

template <class T>
T get_typed(const json& v, const ConfigKey& key) {
  const std::string type = key.type;
  const auto bad = [&]() -> T {
    fail(ErrorCode::ConfigError, std::string("key '") + key.name + "' expects " + type + ", got " + v.dump());
  };
  if constexpr (std::is_same_v<T, std::string>) {
    return v.is_string() ? v.get<std::string>() : bad();
  } else if constexpr (std::is_same_v<T, bool>) {
    return v.is_boolean() ? v.get<bool>() : bad();
  } else if constexpr (std::is_integral_v<T>) {
    return v.is_number_integer() ? v.get<T>() : bad();
  } else {
    return v.is_number() ? v.get<T>() : bad();
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) fail(ErrorCode::ConfigError, message);
}

void require_one_of(const std::string& value, std::initializer_list<const char*> options, const char* key) {
  for (const char* o : options) {
    if (value == o) return;
  }
  std::string list;
  for (const char* o : options) list += std::string(list.empty() ? "" : " | ") + o;
  fail(ErrorCode::ConfigError, std::string("key '") + key + "' must be one of " + list + ", got '" + value + "'");
}

}  // namespace

void validate(const RunConfig& c) {
  require(c.depth >= 1, "depth must be at least 1");
  require(!c.nu.empty(), "nu must not be empty");
  require(c.nu.size() == 1 || static_cast<int>(c.nu.size()) == c.depth, "nu needs one entry or one per layer");
  for (double v : c.nu) require(v >= 0.0 && !std::isnan(v), "nu entries must be non-negative");
  require(c.fold >= 0, "fold must be non-negative");
  require_one_of(c.feature_scale, {"sumsq", "norm", "none"}, "feature_scale");
  require_one_of(c.kernel, {"arccos", "linear"}, "kernel");
  require_one_of(c.adjacency, {"kipf", "lambda"}, "adjacency");
  require_one_of(c.scheme, {"inter", "intra"}, "scheme");
  require_one_of(c.gtt, {"nystrom", "exact"}, "gtt");
  require(c.lambda >= 0.0 && c.lambda <= 1.0, "lambda must lie in [0, 1]");
  require(c.num_inducing >= 1, "num_inducing must be positive");
  require(c.input_scale >= 0.0, "input_scale must be non-negative");
  require(c.epochs >= 0, "epochs must be non-negative");
  require(c.mc_train >= 1 && c.mc_eval >= 1, "Monte-Carlo sample counts must be positive");
  require(c.lr_base >= 0.0 && c.lr_peak >= 0.0 && c.lr_floor >= 0.0, "learning rates must be non-negative");
  require(c.warm_fraction >= 0.0 && c.warm_fraction < 1.0, "warm_fraction must lie in [0, 1)");
  require(c.clip_norm > 0.0, "clip_norm must be positive");
  require(c.min_diag > 0.0, "min_diag must be positive");
  require(!c.learn_affine || c.centering, "learn_affine requires centering");
}

RunConfig config_from_json(const json& j) {
  require(j.is_object(), "config must be a JSON object");
  RunConfig c;
  std::set<std::string> known;
  for (const auto& k : config_keys()) known.insert(k.name);
  for (const auto& [name, v] : j.items()) {
    require(known.count(name) > 0, "unknown config key '" + name + "'");
  }
  for (const auto& key : config_keys()) {
    if (!j.contains(key.name)) continue;
    const json& v = j.at(key.name);
    const std::string n = key.name;
    if (n == "dataset") c.dataset = get_typed<std::string>(v, key);
    else if (n == "output") c.output = get_typed<std::string>(v, key);
    else if (n == "seed") {
      require(v.is_number_integer() && v.get<long long>() >= 0, "key 'seed' expects a non-negative int");
      c.seed = v.get<std::uint64_t>();
    } else if (n == "fold") c.fold = get_typed<int>(v, key);
    else if (n == "feature_scale") c.feature_scale = get_typed<std::string>(v, key);
    else if (n == "depth") c.depth = get_typed<int>(v, key);
    else if (n == "nu") {
      c.nu.clear();
      if (v.is_array()) {
        for (const auto& e : v) c.nu.push_back(parse_nu(e));
      } else {
        c.nu.push_back(parse_nu(v));
      }
    } else if (n == "kernel") c.kernel = get_typed<std::string>(v, key);
    else if (n == "adjacency") c.adjacency = get_typed<std::string>(v, key);
    else if (n == "lambda") c.lambda = get_typed<double>(v, key);
    else if (n == "scheme") c.scheme = get_typed<std::string>(v, key);
    else if (n == "num_inducing") c.num_inducing = get_typed<int>(v, key);
    else if (n == "gtt") c.gtt = get_typed<std::string>(v, key);
    else if (n == "input_scale") c.input_scale = get_typed<double>(v, key);
    else if (n == "centering") c.centering = get_typed<bool>(v, key);
    else if (n == "learn_affine") c.learn_affine = get_typed<bool>(v, key);
    else if (n == "epochs") c.epochs = get_typed<int>(v, key);
    else if (n == "mc_train") c.mc_train = get_typed<int>(v, key);
    else if (n == "mc_eval") c.mc_eval = get_typed<int>(v, key);
    else if (n == "lr_base") c.lr_base = get_typed<double>(v, key);
    else if (n == "lr_peak") c.lr_peak = get_typed<double>(v, key);
    else if (n == "lr_floor") c.lr_floor = get_typed<double>(v, key);
    else if (n == "warm_fraction") c.warm_fraction = get_typed<double>(v, key);
    else if (n == "clip_norm") c.clip_norm = get_typed<double>(v, key);
    else if (n == "min_diag") c.min_diag = get_typed<double>(v, key);
  }
  validate(c);
  return c;
}

json config_to_json(const RunConfig& c) {
  json nu = json::array();
  for (double v : c.nu) nu.push_back(nu_to_json(v));
  return {
      {"dataset", c.dataset},       {"output", c.output},
      {"seed", c.seed},             {"fold", c.fold},
      {"feature_scale", c.feature_scale},
      {"depth", c.depth},           {"nu", nu},
      {"kernel", c.kernel},         {"adjacency", c.adjacency},
      {"lambda", c.lambda},         {"scheme", c.scheme},
      {"num_inducing", c.num_inducing},
      {"gtt", c.gtt},               {"input_scale", c.input_scale},
      {"centering", c.centering},   {"learn_affine", c.learn_affine},
      {"epochs", c.epochs},         {"mc_train", c.mc_train},
      {"mc_eval", c.mc_eval},       {"lr_base", c.lr_base},
      {"lr_peak", c.lr_peak},       {"lr_floor", c.lr_floor},
      {"warm_fraction", c.warm_fraction},
      {"clip_norm", c.clip_norm},   {"min_diag", c.min_diag},
  };
}

namespace {

dataio::ScaleMode scale_mode(const std::string& s) {
  if (s == "norm") return dataio::ScaleMode::Norm;
  if (s == "none") return dataio::ScaleMode::None;
  return dataio::ScaleMode::SumSquares;
}

dkm::Targets targets(const dataio::GraphDataset& d, const std::vector<Index>& items, const SparseMatrix& pool) {
  dkm::Targets t;
  t.task = d.task == dataio::TaskKind::Graph ? dkm::Task::Graph : dkm::Task::Node;
  t.rows = items;
  for (Index i : items) t.labels.push_back(d.labels[static_cast<std::size_t>(i)]);
  t.pool = pool;
  return t;
}

}  // namespace

Prepared prepare(const dataio::GraphDataset& d, const RunConfig& c) {
  validate(c);
  d.validate();
  if (static_cast<std::size_t>(c.fold) >= d.splits.size()) {
    fail(ErrorCode::ConfigError, "fold " + std::to_string(c.fold) + " not present (dataset has " +
                                     std::to_string(d.splits.size()) + ")");
  }
  Prepared p;
  p.num_classes = d.num_classes();
  if (p.num_classes < 2) fail(ErrorCode::SchemaError, "need at least two classes");

  p.adjacency = graph::normalize_kipf(d.edges);
  if (c.adjacency == "lambda") p.adjacency = graph::interpolate_lambda(p.adjacency, c.lambda);

  p.data.features = dataio::scale_features(d.features, scale_mode(c.feature_scale));
  const Index n = d.num_nodes();
  const Index count = std::min<Index>(c.num_inducing, n);
  auto nodes = dkm::sample_inducing_nodes(n, count, c.seed);
  const dkm::SchemeKind kind = c.scheme == "intra" ? dkm::SchemeKind::Intra : dkm::SchemeKind::Inter;
  p.data.scheme = dkm::make_scheme(kind, p.adjacency, nodes);

  Matrix x_i(count, p.data.features.cols());
  for (Index k = 0; k < count; ++k) x_i.row(k) = p.data.features.row(nodes[static_cast<std::size_t>(k)]);

  dkm::ModelShape shape;
  shape.depth = c.depth;
  shape.nu = c.nu;
  shape.base_kernel = c.kernel == "linear" ? kernels::BaseKernel::Linear : kernels::BaseKernel::Arccos;
  shape.gtt_mode = c.gtt == "exact" ? dkm::GttMode::Exact : dkm::GttMode::Nystrom;
  shape.input_scale = c.input_scale > 0.0 ? c.input_scale : 1.0 / static_cast<double>(d.features.cols());
  shape.num_classes = p.num_classes;
  shape.centering.enabled = c.centering;
  shape.centering.learn_affine = c.learn_affine;
  p.model = dkm::init_model(shape, std::move(x_i));
  p.model.head.mc_samples = c.mc_train;

  SparseMatrix pool;
  if (d.task == dataio::TaskKind::Graph) {
    const auto offsets = d.graph_offsets();
    pool = graph::mean_pool_matrix(offsets);
  }
  const auto& split = d.splits[static_cast<std::size_t>(c.fold)];
  p.data.train = targets(d, split.train, pool);
  p.data.val = targets(d, split.val, pool);
  p.data.test = targets(d, split.test, pool);
  return p;
}

train::FitOptions fit_options(const RunConfig& c) {
  train::FitOptions o;
  o.epochs = c.epochs;
  o.seed = c.seed;
  o.clip_norm = c.clip_norm;
  o.min_diag = c.min_diag;
  o.schedule.kind = train::Schedule::Kind::WarmupCosine;
  o.schedule.warmup_cosine = {c.lr_base, c.lr_peak, c.lr_floor, c.epochs, c.warm_fraction};
  return o;
}

Evaluation evaluate(const dkm::DkmModel& model, const train::TrainData& data, int num_classes, int mc_samples,
                    std::uint64_t seed) {
  Evaluation e;
  const Matrix probs = train::predict(model, data, mc_samples, seed);
  e.train_acc = train::accuracy(probs, data.train.rows, data.train.labels);
  e.val_acc = train::accuracy(probs, data.val.rows, data.val.labels);
  e.test_acc = train::accuracy(probs, data.test.rows, data.test.labels);

  std::vector<int> hits(static_cast<std::size_t>(num_classes), 0), total(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t k = 0; k < data.test.rows.size(); ++k) {
    Index best = 0;
    probs.row(data.test.rows[k]).maxCoeff(&best);
    const auto y = static_cast<std::size_t>(data.test.labels[k]);
    ++total[y];
    if (best == data.test.labels[k]) ++hits[y];
  }
  for (std::size_t y = 0; y < hits.size(); ++y) {
    e.per_class_test_acc.push_back(total[y] ? static_cast<double>(hits[y]) / total[y] : 0.0);
  }

  Matrix q = dkm::top_features(model, data.features, data.scheme);
  if (data.test.task == dkm::Task::Graph) q = data.test.pool * q;
  const auto m = static_cast<Index>(data.test.rows.size());
  Matrix qt(m, q.cols());
  Matrix y = Matrix::Zero(m, num_classes);
  for (Index k = 0; k < m; ++k) {
    qt.row(k) = q.row(data.test.rows[static_cast<std::size_t>(k)]);
    y(k, data.test.labels[static_cast<std::size_t>(k)]) = 1.0;
  }
  try {
    e.top_cka = kernels::cka(qt * qt.transpose(), y * y.transpose());
  } catch (const Error& err) {
    if (err.code() != ErrorCode::DegenerateKernel) throw;
    spdlog::warn("top-layer CKA undefined: {}", err.what());
    e.top_cka = std::nan("");
  }
  return e;
}

RunResult run(const dataio::GraphDataset& d, const RunConfig& c,
              const std::function<void(const train::EpochMetrics&)>& on_epoch) {
  Prepared p = prepare(d, c);
  auto opts = fit_options(c);
  opts.on_epoch = on_epoch;
  RunResult r;
  r.fit = train::fit(p.model, p.data, opts);
  r.eval = evaluate(r.fit.model, p.data, p.num_classes, c.mc_eval, c.seed);
  return r;
}

}  // namespace gdkm::experiment
