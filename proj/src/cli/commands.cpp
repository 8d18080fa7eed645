// SPDX-License-Identifier: Apache-2.0
#include "gdkm/checkpoint.hpp"
#include "gdkm/cli.hpp"
#include "gdkm/dataio.hpp"
#include "gdkm/linear.hpp"
#include "gdkm/sweep.hpp"
#include "gdkm/synth.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gdkm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json nan_safe(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        out.push_back(experiment::parse_nu(json(item)));
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        std::size_t used = 0;
        const auto v = std::stoull(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        out.push_back(v);
      } else {
        out.push_back(item);
      }
    } catch (const std::logic_error&) {
      fail(ErrorCode::ConfigError, std::string(flag) + ": cannot parse '" + item + "'");
    }
  }
  if (out.empty()) fail(ErrorCode::ConfigError, std::string(flag) + " must not be empty");
  return out;
}

json evaluation_json(const experiment::Evaluation& e) {
  return {{"train_acc", e.train_acc},
          {"val_acc", e.val_acc},
          {"test_acc", e.test_acc},
          {"per_class_test_acc", e.per_class_test_acc},
          {"top_cka", nan_safe(e.top_cka)}};
}

struct ConfigArgs {
  std::string config;
  std::map<std::string, std::string> overrides;
};

void add_config_args(CLI::App& cmd, ConfigArgs& args) {
  cmd.add_option("-c,--config", args.config, "JSON run config; flags override its keys");
  add_config_flags(cmd, args.overrides);
}

experiment::RunConfig require_dataset(experiment::RunConfig c) {
  if (c.dataset.empty()) fail(ErrorCode::ConfigError, "no dataset given (config key 'dataset' or --dataset)");
  return c;
}

int train_like(experiment::RunConfig c, std::ostream& out) {
  const auto d = dataio::load_dataset(c.dataset);
  experiment::Prepared p = experiment::prepare(d, c);
  const fs::path dir = c.output;
  fs::create_directories(dir);
  write_json(experiment::config_to_json(c), dir / "config.json");

  std::ofstream metrics(dir / "metrics.jsonl");
  if (!metrics) fail(ErrorCode::IoError, "cannot write " + (dir / "metrics.jsonl").string());
  auto opts = experiment::fit_options(c);
  opts.on_epoch = [&](const train::EpochMetrics& m) {
    metrics << train::to_json_line(m) << '\n' << std::flush;
    if (m.epoch % 10 == 0 || m.epoch == c.epochs) {
      spdlog::info("epoch {:4d}  objective {:.6g}  train {:.3f}  val {:.3f}", m.epoch, m.objective, m.train_acc,
                   m.val_acc);
    }
  };
  const train::FitResult fit = train::fit(p.model, p.data, opts);
  checkpoint::save({fit.model, c, p.data.scheme.nodes}, dir / "model.gdkm");

  const auto eval = experiment::evaluate(fit.model, p.data, p.num_classes, c.mc_eval, c.seed);
  json result = evaluation_json(eval);
  result["dataset"] = d.name;
  result["epochs_run"] = static_cast<int>(fit.metrics.size()) - 1;
  result["diverged"] = fit.diverged;
  if (!fit.metrics.empty()) result["final_objective"] = fit.metrics.back().objective;
  write_json(result, dir / "final.json");

  if (fit.diverged) {
    out << error_json(ErrorCode::Diverged, fit.failure).dump() << '\n';
    return kExitNumeric;
  }
  out << result.dump() << '\n';
  return kExitOk;
}

struct LinearDemoArgs {
  Index nodes = 100;
  double p = 0.1;
  Index features = 0;
  std::string lambdas = "0.1,0.3,0.5,1";
  int depth = 2;
  std::uint64_t seed = 0;
  double label_noise = 0.1;
  int gd_epochs = 0;
  double gd_lr = 0.1;
  std::string dataset;
  std::string output = "out";
};

std::string lambda_tag(double lambda) {
  std::ostringstream s;
  s << lambda;
  return s.str();
}

int linear_demo(const LinearDemoArgs& a, std::ostream& out) {
  if (a.nodes < 2) fail(ErrorCode::ConfigError, "--nodes must be at least 2");
  if (a.depth < 1) fail(ErrorCode::ConfigError, "--depth must be at least 1");
  const auto lambdas = parse_list<double>(a.lambdas, "--lambdas");
  for (double l : lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) fail(ErrorCode::ConfigError, "--lambdas entries must lie in [0, 1]");
  }

  Matrix x;
  graph::EdgeList edges;
  std::vector<int> labels;
  if (a.dataset.empty()) {
    const auto d = synth::er_two_class(a.nodes, a.p, a.features, a.seed);
    x = d.features;
    edges = d.edges;
    labels = d.labels;
  } else {
    // First `nodes` nodes and the edges among them.
    const auto d = dataio::load_dataset(a.dataset);
    if (d.task != dataio::TaskKind::Node) fail(ErrorCode::SchemaError, "linear-demo needs a node-task dataset");
    const Index n = std::min(a.nodes, d.num_nodes());
    x = dataio::scale_features(d.features.topRows(n));
    labels.assign(d.labels.begin(), d.labels.begin() + n);
    edges.num_nodes = n;
    for (const auto& [u, v] : d.edges.edges) {
      if (u < n && v < n) edges.edges.emplace_back(u, v);
    }
    // Relabel to consecutive classes so the label kernel has no empty columns.
    std::map<int, int> remap;
    for (int& y : labels) y = remap.emplace(y, static_cast<int>(remap.size())).first->second;
  }

  const fs::path dir = a.output;
  fs::create_directories(dir);
  linear::DemoOptions opts;
  opts.depth = a.depth;
  opts.label_noise = a.label_noise;
  opts.run_gd = a.gd_epochs > 0;
  opts.gd.epochs = a.gd_epochs;
  opts.gd.lr = a.gd_lr;
  opts.gd.seed = a.seed;

  std::ofstream table(dir / "cka.csv");
  if (!table) fail(ErrorCode::IoError, "cannot write " + (dir / "cka.csv").string());
  table << "lambda,dkm_cka,nngp_cka,analytic_objective,gd_objective,gd_max_abs\n" << std::setprecision(10);
  json rows = json::array();
  for (double lambda : lambdas) {
    const auto r = linear::linear_demo(x, edges, labels, lambda, opts);
    const std::string tag = lambda_tag(lambda);
    for (int l = 0; l < a.depth; ++l) {
      const auto k = static_cast<std::size_t>(l);
      const std::string suffix = "_lambda" + tag + "_layer" + std::to_string(l + 1) + ".csv";
      dataio::write_csv(kernels::normalize_kernel(r.dkm[k]), dir / ("dkm" + suffix));
      dataio::write_csv(kernels::normalize_kernel(r.nngp[k]), dir / ("nngp" + suffix));
      if (opts.run_gd) dataio::write_csv(kernels::normalize_kernel(r.gd[k]), dir / ("gd" + suffix));
    }
    if (opts.run_gd) {
      std::ofstream trace(dir / ("gd_objective_lambda" + tag + ".csv"));
      trace << "epoch,objective\n" << std::setprecision(12);
      for (std::size_t e = 0; e < r.gd_trace.size(); ++e) trace << e << ',' << r.gd_trace[e] << '\n';
    }
    table << lambda << ',' << r.dkm_cka << ',' << r.nngp_cka << ',' << r.analytic_objective << ',';
    if (opts.run_gd) table << r.gd_objective << ',' << r.gd_max_abs;
    else table << ',';
    table << '\n';
    json row = {{"lambda", lambda}, {"dkm_cka", r.dkm_cka}, {"nngp_cka", r.nngp_cka},
                {"analytic_objective", r.analytic_objective}};
    if (opts.run_gd) {
      row["gd_objective"] = r.gd_objective;
      row["gd_max_abs"] = r.gd_max_abs;
    }
    spdlog::info("lambda {}: CKA dkm {:.4f} nngp {:.4f}", lambda, r.dkm_cka, r.nngp_cka);
    rows.push_back(row);
  }
  out << json{{"rows", rows}}.dump() << '\n';
  return kExitOk;
}

struct SweepArgs {
  std::string nu_grid = "0,0.01,0.1,1,10,100,1000";
  std::string schemes = "inter,intra";
  std::string seeds = "0,1,2";
  int jobs = 1;
};

int sweep(experiment::RunConfig c, const SweepArgs& a, std::ostream& out) {
  experiment::SweepGrid grid;
  grid.nu = parse_list<double>(a.nu_grid, "--nu-grid");
  grid.schemes = parse_list<std::string>(a.schemes, "--schemes");
  grid.seeds = parse_list<std::uint64_t>(a.seeds, "--seeds");
  if (a.jobs < 1) fail(ErrorCode::ConfigError, "--jobs must be positive");
  // Validate every cell before running any of them.
  for (double nu : grid.nu) {
    for (const auto& s : grid.schemes) {
      auto cell = c;
      cell.nu = {nu};
      cell.scheme = s;
      experiment::validate(cell);
    }
  }
  const auto d = dataio::load_dataset(c.dataset);
  const fs::path dir = c.output;
  fs::create_directories(dir);
  const auto rows = experiment::sweep_nu(d, c, grid, a.jobs);
  experiment::write_sweep_csv(rows, dir / "sweep.csv");
  const auto summary = experiment::summarize(rows);
  experiment::write_summary_json(summary, dir / "summary.json");
  std::ifstream in(dir / "summary.json");
  out << json::parse(in).dump() << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  int mc_samples = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int eval(const EvalArgs& a, std::ostream& out) {
  const auto ck = checkpoint::load(a.checkpoint);
  auto c = ck.config;
  if (!a.dataset.empty()) c.dataset = a.dataset;
  if (a.seed_set) c.seed = a.seed;
  const auto d = dataio::load_dataset(require_dataset(c).dataset);
  // The scheme is rebuilt from the checkpoint's own seed so inducing nodes match.
  auto build = ck.config;
  build.dataset = c.dataset;
  experiment::Prepared p = experiment::prepare(d, build);
  checkpoint::attach(ck, p);
  const int mc = a.mc_samples > 0 ? a.mc_samples : c.mc_eval;
  const auto e = experiment::evaluate(p.model, p.data, p.num_classes, mc, c.seed);
  json j = evaluation_json(e);
  j["dataset"] = d.name;
  j["mc_samples"] = mc;
  out << j.dump() << '\n';
  return kExitOk;
}

int homophily(const std::string& dir, std::ostream& out) {
  const auto d = dataio::load_dataset(dir);
  if (d.task != dataio::TaskKind::Node) fail(ErrorCode::SchemaError, "homophily needs per-node labels");
  const auto canon = d.edges.canonical();
  out << json{{"dataset", d.name},
              {"nodes", d.num_nodes()},
              {"edges", canon.edges.size()},
              {"features", d.features.cols()},
              {"classes", d.num_classes()},
              {"edge_homophily", graph::edge_homophily(d.edges, d.labels)}}
             .dump()
      << '\n';
  return kExitOk;
}

struct SynthArgs {
  std::string kind = "heterophilous";
  Index nodes = 300;
  int classes = 2;
  Index features = 16;
  double avg_degree = 4.0;
  double p = 0.1;
  double p_in = 0.05;
  double p_out = 0.005;
  double signal = 0.5;
  int train_per_class = 20;
  Index val = 100;
  std::uint64_t seed = 0;
  std::string output;
};

int synth_cmd(const SynthArgs& a, std::ostream& out) {
  if (a.output.empty()) fail(ErrorCode::ConfigError, "--output is required");
  synth::SplitSizes sizes{a.train_per_class, a.val, 0};
  dataio::GraphDataset d;
  if (a.kind == "heterophilous") d = synth::heterophilous(a.nodes, a.classes, a.features, a.avg_degree, a.seed, sizes);
  else if (a.kind == "homophilous")
    d = synth::homophilous(a.nodes, a.classes, a.features, a.p_in, a.p_out, a.signal, a.seed, sizes);
  else if (a.kind == "er") d = synth::er_two_class(a.nodes, a.p, a.features, a.seed);
  else fail(ErrorCode::ConfigError, "--kind must be heterophilous | homophilous | er");
  dataio::save_dataset(d, a.output);
  out << json{{"output", a.output}, {"nodes", d.num_nodes()}, {"edges", d.edges.canonical().edges.size()},
              {"edge_homophily", graph::edge_homophily(d.edges, d.labels)}}
             .dump()
      << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out) {
  setup_logging();
  CLI::App app{"Graph convolutional deep kernel machines"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gdkm 0.1.0");

  ConfigArgs train_args, nngp_args, sweep_cfg;
  auto* train = app.add_subcommand("train", "train a sparse graph DKM; writes model.gdkm, metrics.jsonl, final.json");
  add_config_args(*train, train_args);
  auto* nngp = app.add_subcommand("nngp", "train only the output head over the fixed NNGP kernel stack (nu = inf)");
  add_config_args(*nngp, nngp_args);

  LinearDemoArgs lin;
  auto* demo = app.add_subcommand("linear-demo", "closed-form linear DKM vs NNGP kernels over a lambda grid");
  demo->add_option("--nodes", lin.nodes, "number of nodes")->capture_default_str();
  demo->add_option("--p", lin.p, "Erdos-Renyi edge probability")->capture_default_str();
  demo->add_option("--features", lin.features, "synthetic feature columns (0 means one per node)")->capture_default_str();
  demo->add_option("--lambdas", lin.lambdas, "comma-separated identity weights")->capture_default_str();
  demo->add_option("--depth", lin.depth, "Gram layers L")->capture_default_str();
  demo->add_option("--seed", lin.seed, "seed")->capture_default_str();
  demo->add_option("--label-noise", lin.label_noise, "output kernel Y Y^T / C + noise I")->capture_default_str();
  demo->add_option("--gd-epochs", lin.gd_epochs, "gradient-descent epochs to confirm the closed form (0 skips)")
      ->capture_default_str();
  demo->add_option("--gd-lr", lin.gd_lr, "initial rate of the polynomial schedule")->capture_default_str();
  demo->add_option("--dataset", lin.dataset, "use the first --nodes nodes of this dataset instead of synthetic data");
  demo->add_option("--output", lin.output, "output directory")->capture_default_str();

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "grid over nu x scheme x seed; writes sweep.csv and summary.json");
  add_config_args(*sweep_cmd, sweep_cfg);
  sweep_cmd->add_option("--nu-grid", sw.nu_grid, "comma-separated nu values (inf allowed)")->capture_default_str();
  sweep_cmd->add_option("--schemes", sw.schemes, "comma-separated inducing schemes")->capture_default_str();
  sweep_cmd->add_option("--seeds", sw.seeds, "comma-separated seeds")->capture_default_str();
  sweep_cmd->add_option("--jobs", sw.jobs, "cells run in parallel")->capture_default_str();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint: accuracy, per-class accuracy, top-layer CKA");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "model.gdkm written by train")->required();
  eval_cmd->add_option("--dataset", ev.dataset, "dataset directory (default: the one in the checkpoint)");
  eval_cmd->add_option("--mc-samples", ev.mc_samples, "Monte-Carlo samples (default: mc_eval of the checkpoint)");
  eval_cmd->add_option_function<std::uint64_t>(
      "--seed", [&](const std::uint64_t& s) { ev.seed = s, ev.seed_set = true; }, "seed for the evaluation draws");

  std::string homophily_dir;
  auto* homo = app.add_subcommand("homophily", "edge homophily and basic counts of a dataset");
  homo->add_option("--dataset", homophily_dir, "dataset directory")->required();

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "write a seeded synthetic dataset");
  synth->add_option("--kind", sy.kind, "heterophilous | homophilous | er")->capture_default_str();
  synth->add_option("--nodes", sy.nodes, "number of nodes")->capture_default_str();
  synth->add_option("--classes", sy.classes, "number of classes")->capture_default_str();
  synth->add_option("--features", sy.features, "feature columns (er: 0 means one per node)")->capture_default_str();
  synth->add_option("--avg-degree", sy.avg_degree, "heterophilous: expected degree")->capture_default_str();
  synth->add_option("--p", sy.p, "er: edge probability")->capture_default_str();
  synth->add_option("--p-in", sy.p_in, "homophilous: within-class edge probability")->capture_default_str();
  synth->add_option("--p-out", sy.p_out, "homophilous: across-class edge probability")->capture_default_str();
  synth->add_option("--signal", sy.signal, "homophilous: class-mean strength")->capture_default_str();
  synth->add_option("--train-per-class", sy.train_per_class, "labelled training nodes per class")->capture_default_str();
  synth->add_option("--val", sy.val, "validation nodes")->capture_default_str();
  synth->add_option("--seed", sy.seed, "seed")->capture_default_str();
  synth->add_option("--output", sy.output, "output directory")->required();

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::Success& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      out << error_json(ErrorCode::ConfigError, e.what()).dump() << '\n';
      spdlog::error("{}", e.what());
      return kExitConfig;
    }
    if (train->parsed()) return train_like(require_dataset(resolve_config(train_args.config, train_args.overrides)), out);
    if (nngp->parsed()) {
      auto c = require_dataset(resolve_config(nngp_args.config, nngp_args.overrides));
      c.nu = {dkm::kInfiniteNu};
      return train_like(c, out);
    }
    if (demo->parsed()) return linear_demo(lin, out);
    if (sweep_cmd->parsed()) return sweep(require_dataset(resolve_config(sweep_cfg.config, sweep_cfg.overrides)), sw, out);
    if (eval_cmd->parsed()) return eval(ev, out);
    if (homo->parsed()) return homophily(homophily_dir, out);
    if (synth->parsed()) return synth_cmd(sy, out);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    out << error_json(e.code(), e.what()).dump() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    out << error_json(ErrorCode::IoError, e.what()).dump() << '\n';
    return kExitData;
  }
  return kExitConfig;
}

}  // namespace gdkm::cli
