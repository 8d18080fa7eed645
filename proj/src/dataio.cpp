// SPDX-License-Identifier: Apache-2.0
#include "gdkm/dataio.hpp"

#include "gdkm/error.hpp"
#include "gdkm/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string_view>

namespace gdkm::dataio {

namespace fs = std::filesystem;

namespace {

std::string where(const fs::path& file, std::size_t line, std::size_t field = 0) {
  std::string s = file.filename().string() + ":" + std::to_string(line);
  if (field > 0) s += " field " + std::to_string(field);
  return s;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view text, const fs::path& file, std::size_t line, std::size_t field) {
  text = trim(text);
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    fail(ErrorCode::ParseError, where(file, line, field) + ": cannot parse '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::ifstream open_in(const fs::path& p) {
  if (!fs::exists(p)) fail(ErrorCode::SchemaError, "missing file " + p.string());
  std::ifstream in(p);
  if (!in) fail(ErrorCode::IoError, "cannot open " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p, bool binary = false) {
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) fail(ErrorCode::IoError, "cannot write " + p.string());
  return out;
}

/// Non-blank, non-comment lines with their 1-based line numbers.
template <class F>
void for_each_line(std::istream& in, F&& f) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::string_view v = trim(line);
    if (v.empty() || v.front() == '#') continue;
    f(v, n);
  }
}

Matrix read_features(const fs::path& p) {
  auto in = open_in(p);
  std::vector<std::vector<double>> rows;
  for_each_line(in, [&](std::string_view v, std::size_t n) {
    const auto fields = split_on(v, ',');
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t f = 0; f < fields.size(); ++f) {
      const double x = parse_number<double>(fields[f], p, n, f + 1);
      if (!std::isfinite(x)) fail(ErrorCode::ParseError, where(p, n, f + 1) + ": non-finite value");
      row.push_back(x);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      fail(ErrorCode::SchemaError, where(p, n) + ": expected " + std::to_string(rows.front().size()) +
                                       " columns, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  });
  if (rows.empty()) fail(ErrorCode::SchemaError, p.string() + " has no rows");
  Matrix x(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return x;
}

graph::EdgeList read_edges(const fs::path& p, Index num_nodes) {
  auto in = open_in(p);
  graph::EdgeList e;
  e.num_nodes = num_nodes;
  for_each_line(in, [&](std::string_view v, std::size_t n) {
    std::vector<std::string_view> parts;
    for (auto tok : split_on(v, ' ')) {
      for (auto t : split_on(tok, '\t')) {
        if (!trim(t).empty()) parts.push_back(t);
      }
    }
    if (parts.size() != 2) fail(ErrorCode::ParseError, where(p, n) + ": expected 'u v'");
    const auto u = parse_number<long long>(parts[0], p, n, 1);
    const auto w = parse_number<long long>(parts[1], p, n, 2);
    if (u < 0 || w < 0 || u >= num_nodes || w >= num_nodes) {
      fail(ErrorCode::SchemaError, where(p, n) + ": edge (" + std::to_string(u) + ", " + std::to_string(w) +
                                       ") outside [0, " + std::to_string(num_nodes) + ")");
    }
    e.edges.emplace_back(static_cast<Index>(u), static_cast<Index>(w));
  });
  return e;
}

std::vector<Index> json_indices(const nlohmann::json& j, const char* key, Index limit, const fs::path& p) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    fail(ErrorCode::SchemaError, p.filename().string() + ": missing array '" + key + "'");
  }
  std::vector<Index> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number_integer()) fail(ErrorCode::SchemaError, p.filename().string() + ": non-integer index in " + key);
    const auto i = v.get<long long>();
    if (i < 0 || i >= limit) {
      fail(ErrorCode::SchemaError, p.filename().string() + ": index " + std::to_string(i) + " in '" + key +
                                       "' outside [0, " + std::to_string(limit) + ")");
    }
    out.push_back(static_cast<Index>(i));
  }
  return out;
}

std::vector<Split> read_splits(const fs::path& p, Index limit) {
  auto in = open_in(p);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ParseError, p.filename().string() + ": " + e.what());
  }
  const auto one = [&](const nlohmann::json& s) {
    if (!s.is_object()) fail(ErrorCode::SchemaError, p.filename().string() + ": split must be an object");
    return Split{json_indices(s, "train", limit, p), json_indices(s, "val", limit, p), json_indices(s, "test", limit, p)};
  };
  std::vector<Split> out;
  if (j.is_array()) {
    for (const auto& s : j) out.push_back(one(s));
  } else {
    out.push_back(one(j));
  }
  if (out.empty()) fail(ErrorCode::SchemaError, p.filename().string() + ": no splits");
  return out;
}

nlohmann::json split_json(const Split& s) {
  return {{"train", s.train}, {"val", s.val}, {"test", s.test}};
}

}  // namespace

int GraphDataset::num_classes() const {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

Index GraphDataset::num_graphs() const {
  return task == TaskKind::Graph ? static_cast<Index>(labels.size()) : 0;
}

std::vector<Index> GraphDataset::graph_offsets() const {
  std::vector<Index> off(static_cast<std::size_t>(num_graphs()) + 1, 0);
  for (Index g : graph_id) ++off[static_cast<std::size_t>(g) + 1];
  for (std::size_t k = 1; k < off.size(); ++k) off[k] += off[k - 1];
  return off;
}

void GraphDataset::validate() const {
  const Index p = num_nodes();
  if (p == 0) fail(ErrorCode::SchemaError, "dataset has no nodes");
  if (!features.allFinite()) fail(ErrorCode::SchemaError, "features contain non-finite values");
  if (edges.num_nodes != p) fail(ErrorCode::SchemaError, "edge list node count differs from features");
  const Index items = task == TaskKind::Node ? p : static_cast<Index>(labels.size());
  if (task == TaskKind::Node && static_cast<Index>(labels.size()) != p) {
    fail(ErrorCode::SchemaError, "expected " + std::to_string(p) + " labels, found " + std::to_string(labels.size()));
  }
  for (int y : labels) {
    if (y < 0) fail(ErrorCode::SchemaError, "negative label " + std::to_string(y));
  }
  if (task == TaskKind::Graph) {
    if (static_cast<Index>(graph_id.size()) != p) fail(ErrorCode::SchemaError, "graph_id must cover every node");
    for (std::size_t k = 0; k < graph_id.size(); ++k) {
      if (graph_id[k] < 0 || graph_id[k] >= items) {
        fail(ErrorCode::SchemaError, "graph id " + std::to_string(graph_id[k]) + " has no label");
      }
      if (k > 0 && graph_id[k] < graph_id[k - 1]) {
        fail(ErrorCode::SchemaError, "graph ids must be non-decreasing (node " + std::to_string(k) + ")");
      }
    }
    for (const auto& [u, v] : edges.edges) {
      if (graph_id[static_cast<std::size_t>(u)] != graph_id[static_cast<std::size_t>(v)]) {
        fail(ErrorCode::SchemaError, "edge (" + std::to_string(u) + ", " + std::to_string(v) + ") crosses graphs");
      }
    }
  }
  for (std::size_t f = 0; f < splits.size(); ++f) {
    std::set<Index> seen;
    for (const auto* part : {&splits[f].train, &splits[f].val, &splits[f].test}) {
      for (Index i : *part) {
        if (i < 0 || i >= items) fail(ErrorCode::SchemaError, "split index " + std::to_string(i) + " out of range");
        if (!seen.insert(i).second) {
          fail(ErrorCode::SchemaError, "split " + std::to_string(f) + " is not disjoint at " + std::to_string(i));
        }
      }
    }
  }
}

GraphDataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::SchemaError, "dataset directory " + dir.string() + " not found");
  GraphDataset d;
  d.name = dir.filename().string();
  if (d.name.empty()) d.name = dir.parent_path().filename().string();
  d.features = read_features(dir / "features.csv");
  const Index p = d.features.rows();
  d.edges = read_edges(dir / "edges.txt", p);

  const fs::path gid = dir / "graph_id.csv";
  if (fs::exists(gid)) {
    d.task = TaskKind::Graph;
    auto in = open_in(gid);
    for_each_line(in, [&](std::string_view v, std::size_t n) {
      d.graph_id.push_back(static_cast<Index>(parse_number<long long>(v, gid, n, 1)));
    });
  }

  const fs::path lp = dir / "labels.csv";
  auto in = open_in(lp);
  if (d.task == TaskKind::Node) {
    for_each_line(in, [&](std::string_view v, std::size_t n) { d.labels.push_back(parse_number<int>(v, lp, n, 1)); });
  } else {
    std::map<Index, int> by_graph;
    for_each_line(in, [&](std::string_view v, std::size_t n) {
      const auto fields = split_on(v, ',');
      if (fields.size() != 2) fail(ErrorCode::ParseError, where(lp, n) + ": expected 'graph_id,label'");
      const auto g = static_cast<Index>(parse_number<long long>(fields[0], lp, n, 1));
      if (!by_graph.emplace(g, parse_number<int>(fields[1], lp, n, 2)).second) {
        fail(ErrorCode::SchemaError, where(lp, n) + ": duplicate graph id " + std::to_string(g));
      }
    });
    Index expect = 0;
    for (const auto& [g, y] : by_graph) {
      if (g != expect++) fail(ErrorCode::SchemaError, "graph labels must cover ids 0..G-1 without gaps");
      d.labels.push_back(y);
    }
  }

  const Index items = d.task == TaskKind::Node ? p : static_cast<Index>(d.labels.size());
  const fs::path sp = dir / "splits.json";
  if (fs::exists(sp)) {
    d.splits = read_splits(sp, items);
  } else if (d.task == TaskKind::Graph) {
    d.splits = stratified_folds(d.labels, 10, 0);
  } else {
    fail(ErrorCode::SchemaError, "missing file " + sp.string());
  }
  d.validate();
  return d;
}

void save_dataset(const GraphDataset& d, const fs::path& dir) {
  d.validate();
  fs::create_directories(dir);
  write_csv(d.features, dir / "features.csv");
  {
    auto out = open_out(dir / "edges.txt");
    for (const auto& [u, v] : d.edges.edges) out << u << ' ' << v << '\n';
  }
  {
    auto out = open_out(dir / "labels.csv");
    for (std::size_t k = 0; k < d.labels.size(); ++k) {
      if (d.task == TaskKind::Graph) out << k << ',';
      out << d.labels[k] << '\n';
    }
  }
  if (d.task == TaskKind::Graph) {
    auto out = open_out(dir / "graph_id.csv");
    for (Index g : d.graph_id) out << g << '\n';
  }
  nlohmann::json j;
  if (d.splits.size() == 1) {
    j = split_json(d.splits.front());
  } else {
    j = nlohmann::json::array();
    for (const auto& s : d.splits) j.push_back(split_json(s));
  }
  open_out(dir / "splits.json") << j.dump() << '\n';
}

Matrix scale_features(const Matrix& x, ScaleMode mode) {
  if (mode == ScaleMode::None) return x;
  Matrix out = x;
  for (Index i = 0; i < x.rows(); ++i) {
    const double ss = x.row(i).squaredNorm();
    if (ss == 0.0) continue;
    out.row(i) /= mode == ScaleMode::SumSquares ? ss : std::sqrt(ss);
  }
  return out;
}

std::vector<Split> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  if (folds < 3) fail(ErrorCode::ConfigError, "stratified folds need at least 3 folds");
  std::map<int, std::vector<Index>> by_class;
  for (std::size_t k = 0; k < labels.size(); ++k) by_class[labels[k]].push_back(static_cast<Index>(k));
  std::vector<std::vector<Index>> slice(static_cast<std::size_t>(folds));
  Rng rng(seed, Stream::Split);
  std::size_t next = 0;
  for (auto& [y, items] : by_class) {
    std::shuffle(items.begin(), items.end(), rng.engine());
    for (Index i : items) slice[next++ % slice.size()].push_back(i);
  }
  std::vector<Split> out;
  for (std::size_t f = 0; f < slice.size(); ++f) {
    Split s;
    s.test = slice[f];
    s.val = slice[(f + 1) % slice.size()];
    for (std::size_t g = 0; g < slice.size(); ++g) {
      if (g != f && g != (f + 1) % slice.size()) s.train.insert(s.train.end(), slice[g].begin(), slice[g].end());
    }
    for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
    out.push_back(std::move(s));
  }
  return out;
}

Split stratified_split(std::span<const int> labels, int train_per_class, Index val_size, Index test_size,
                       std::uint64_t seed) {
  std::map<int, std::vector<Index>> by_class;
  for (std::size_t k = 0; k < labels.size(); ++k) by_class[labels[k]].push_back(static_cast<Index>(k));
  Rng rng(seed, Stream::Split);
  Split s;
  std::vector<Index> rest;
  for (auto& [y, items] : by_class) {
    std::shuffle(items.begin(), items.end(), rng.engine());
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(train_per_class), items.size());
    s.train.insert(s.train.end(), items.begin(), items.begin() + static_cast<std::ptrdiff_t>(take));
    rest.insert(rest.end(), items.begin() + static_cast<std::ptrdiff_t>(take), items.end());
  }
  std::shuffle(rest.begin(), rest.end(), rng.engine());
  if (val_size < 0 || test_size < 0 || val_size + test_size > static_cast<Index>(rest.size())) {
    fail(ErrorCode::ConfigError, "not enough items for the requested validation and test sizes");
  }
  s.val.assign(rest.begin(), rest.begin() + val_size);
  s.test.assign(rest.begin() + val_size, rest.begin() + val_size + test_size);
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

// ---------------------------------------------------------------------------
// Kernel files

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t size, std::uint64_t hash) {
  for (std::size_t k = 0; k < size; ++k) {
    hash ^= data[k];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

namespace {

static_assert(std::endian::native == std::endian::little, "kernel files assume a little-endian host");

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void matrix(const Matrix& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    bytes(rm.data(), sizeof(double) * static_cast<std::size_t>(rm.size()));
  }
  void save(const fs::path& path) {
    const std::uint64_t h = fnv1a(buf_.data(), buf_.size());
    bytes(&h, sizeof h);
    auto out = open_out(path, true);
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
  }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(const fs::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (buf_.size() < 4 + 4 + sizeof(std::uint64_t)) fail(ErrorCode::ChecksumMismatch, path.string() + " is truncated");
    std::uint64_t stored = 0;
    std::memcpy(&stored, buf_.data() + buf_.size() - sizeof stored, sizeof stored);
    end_ = buf_.size() - sizeof stored;
    if (fnv1a(buf_.data(), end_) != stored) fail(ErrorCode::ChecksumMismatch, path.string() + " fails its checksum");
    if (std::memcmp(buf_.data(), "GDKM", 4) != 0) fail(ErrorCode::SchemaError, path.string() + " lacks the GDKM magic");
    pos_ = 4;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    take(&v, sizeof v);
    return v;
  }
  Matrix matrix() {
    const std::uint32_t r = u32();
    const std::uint32_t c = u32();
    const std::size_t n = static_cast<std::size_t>(r) * c;
    if (n * sizeof(double) > end_ - pos_) {
      fail(ErrorCode::SchemaError, path_.string() + ": header dims exceed the payload");
    }
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(r, c);
    take(rm.data(), n * sizeof(double));
    return rm;
  }
  void finish() const {
    if (pos_ != end_) fail(ErrorCode::SchemaError, path_.string() + ": payload longer than header dims");
  }

 private:
  void take(void* p, std::size_t n) {
    if (n > end_ - pos_) fail(ErrorCode::SchemaError, path_.string() + ": header dims exceed the payload");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  fs::path path_;
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0, end_ = 0;
};

}  // namespace

void save_kernel(const Matrix& k, const fs::path& path) {
  Writer w;
  w.bytes("GDKM", 4);
  w.u32(kKernelVersion);
  w.matrix(k);
  w.save(path);
}

Matrix load_kernel(const fs::path& path) {
  Reader r(path);
  if (const auto v = r.u32(); v != kKernelVersion) {
    fail(ErrorCode::SchemaError, path.string() + ": unsupported kernel version " + std::to_string(v));
  }
  Matrix m = r.matrix();
  r.finish();
  return m;
}

void save_block_gram(const kernels::BlockGram& k, const fs::path& path) {
  Writer w;
  w.bytes("GDKM", 4);
  w.u32(kBlockGramVersion);
  w.matrix(k.ii);
  w.matrix(k.ti);
  w.matrix(Matrix(k.tt_diag));
  w.matrix(k.tt ? *k.tt : Matrix(0, 0));
  w.save(path);
}

kernels::BlockGram load_block_gram(const fs::path& path) {
  Reader r(path);
  if (const auto v = r.u32(); v != kBlockGramVersion) {
    fail(ErrorCode::SchemaError, path.string() + ": not a block Gram file (version " + std::to_string(v) + ")");
  }
  kernels::BlockGram k;
  k.ii = r.matrix();
  k.ti = r.matrix();
  const Matrix d = r.matrix();
  const Matrix tt = r.matrix();
  r.finish();
  if (d.cols() > 1) fail(ErrorCode::SchemaError, path.string() + ": tt_diag must be a column");
  k.tt_diag = d.size() ? Vector(d.col(0)) : Vector();
  if (tt.size() > 0) k.tt = tt;
  if (k.ii.rows() != k.ii.cols() || (k.ti.size() && k.ti.cols() != k.ii.rows())) {
    fail(ErrorCode::SchemaError, path.string() + ": inconsistent block shapes");
  }
  return k;
}

void save_matrices(std::span<const Matrix> ms, const fs::path& path) {
  Writer w;
  w.bytes("GDKM", 4);
  w.u32(kBundleVersion);
  w.u32(static_cast<std::uint32_t>(ms.size()));
  for (const auto& m : ms) w.matrix(m);
  w.save(path);
}

std::vector<Matrix> load_matrices(const fs::path& path) {
  Reader r(path);
  if (const auto v = r.u32(); v != kBundleVersion) {
    fail(ErrorCode::SchemaError, path.string() + ": not a matrix bundle (version " + std::to_string(v) + ")");
  }
  const std::uint32_t n = r.u32();
  std::vector<Matrix> out;
  for (std::uint32_t k = 0; k < n; ++k) out.push_back(r.matrix());
  r.finish();
  return out;
}

void write_csv(const Matrix& m, const fs::path& path) {
  auto out = open_out(path);
  out << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

}  // namespace gdkm::dataio
