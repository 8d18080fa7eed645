// SPDX-License-Identifier: Apache-2.0
#include "gdkm/sweep.hpp"

#include "gdkm/error.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <thread>

namespace gdkm::experiment {

std::vector<SweepRow> sweep_nu(const dataio::GraphDataset& d, const RunConfig& base, const SweepGrid& grid,
                               int jobs) {
  if (grid.nu.empty() || grid.schemes.empty() || grid.seeds.empty()) {
    fail(ErrorCode::ConfigError, "sweep grids must be nonempty");
  }
  std::vector<SweepRow> rows;
  std::vector<RunConfig> configs;
  for (double nu : grid.nu) {
    for (const auto& scheme : grid.schemes) {
      for (auto seed : grid.seeds) {
        RunConfig c = base;
        c.nu = {nu};
        c.scheme = scheme;
        c.seed = seed;
        validate(c);
        configs.push_back(c);
        rows.push_back({d.name, nu, scheme, seed, 0.0, 0.0, true, {}});
      }
    }
  }

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < configs.size(); k = next++) {
      auto& row = rows[k];
      try {
        const RunResult r = run(d, configs[k]);
        row.val_acc = r.eval.val_acc;
        row.test_acc = r.eval.test_acc;
        if (r.fit.diverged) {
          row.ok = false;
          row.error = r.fit.failure;
        }
      } catch (const Error& e) {
        row.ok = false;
        row.error = e.what();
      }
      spdlog::info("sweep cell nu={} scheme={} seed={}: val {:.4f} test {:.4f}{}", row.nu, row.scheme, row.seed,
                   row.val_acc, row.test_acc, row.ok ? "" : " (failed: " + row.error + ")");
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(configs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return rows;
}

SweepSummary summarize(const std::vector<SweepRow>& rows) {
  SweepSummary s;
  if (!rows.empty()) s.dataset = rows.front().dataset;
  for (const auto& r : rows) {
    auto it = std::find_if(s.cells.begin(), s.cells.end(),
                           [&](const SweepCell& c) { return c.nu == r.nu && c.scheme == r.scheme; });
    if (it == s.cells.end()) {
      s.cells.push_back({r.nu, r.scheme});
      it = s.cells.end() - 1;
    }
    if (!r.ok) {
      ++it->failed;
      continue;
    }
    ++it->runs;
    it->val_mean += r.val_acc;
    it->test_mean += r.test_acc;
  }
  for (auto& c : s.cells) {
    if (c.runs == 0) continue;
    c.val_mean /= c.runs;
    c.test_mean /= c.runs;
    for (const auto& r : rows) {
      if (!r.ok || r.nu != c.nu || r.scheme != c.scheme) continue;
      c.val_std += (r.val_acc - c.val_mean) * (r.val_acc - c.val_mean);
      c.test_std += (r.test_acc - c.test_mean) * (r.test_acc - c.test_mean);
    }
    const double dof = c.runs > 1 ? c.runs - 1 : 1;
    c.val_std = std::sqrt(c.val_std / dof);
    c.test_std = std::sqrt(c.test_std / dof);
  }
  for (std::size_t k = 0; k < s.cells.size(); ++k) {
    if (s.cells[k].runs == 0) continue;
    if (s.best < 0 || s.cells[k].val_mean > s.cells[static_cast<std::size_t>(s.best)].val_mean) {
      s.best = static_cast<int>(k);
    }
  }
  return s;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << "dataset,nu,scheme,seed,val_acc,test_acc,status\n" << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.dataset << ',' << nu_to_json(r.nu).dump() << ',' << r.scheme << ',' << r.seed << ',';
    if (r.ok) {
      out << r.val_acc << ',' << r.test_acc << ",ok\n";
    } else {
      out << ",,failed\n";
    }
  }
}

void write_summary_json(const SweepSummary& s, const std::filesystem::path& path) {
  nlohmann::json j;
  j["dataset"] = s.dataset;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : s.cells) {
    j["cells"].push_back({{"nu", nu_to_json(c.nu)},
                          {"scheme", c.scheme},
                          {"runs", c.runs},
                          {"failed", c.failed},
                          {"val_mean", c.val_mean},
                          {"val_std", c.val_std},
                          {"test_mean", c.test_mean},
                          {"test_std", c.test_std}});
  }
  if (s.best >= 0) {
    const auto& b = s.cells[static_cast<std::size_t>(s.best)];
    j["best"] = {{"nu", nu_to_json(b.nu)}, {"scheme", b.scheme}, {"val_mean", b.val_mean}, {"test_mean", b.test_mean}};
  } else {
    j["best"] = nullptr;
  }
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace gdkm::experiment
