// SPDX-License-Identifier: Apache-2.0
#include "gdkm/dataio.hpp"
#include "gdkm/error.hpp"
#include "gdkm/synth.hpp"

#include "../support/checks.hpp"

#include <doctest.h>

#include <unistd.h>

#include <cstring>
#include <fstream>
#include <set>

using namespace gdkm;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = GDKM_FIXTURES;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("gdkm_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::ConfigError;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("minimal fixture loads") {
  const auto d = dataio::load_dataset(kFixtures / "tiny");
  CHECK(d.num_nodes() == 3);
  CHECK(d.features.cols() == 2);
  CHECK(d.edges.canonical().edges.size() == 2);
  CHECK(d.labels == std::vector<int>{0, 0, 1});
  CHECK(d.num_classes() == 2);
  CHECK(d.task == dataio::TaskKind::Node);
  REQUIRE(d.splits.size() == 1);
  CHECK(d.splits[0].train == std::vector<Index>{0, 2});
  CHECK(d.splits[0].val == std::vector<Index>{1});
  CHECK(d.splits[0].test.empty());
}

TEST_CASE("out-of-range edges are schema errors naming the line") {
  TempDir t("badedge");
  fs::copy(kFixtures / "tiny", t.path, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  write(t.path / "edges.txt", "0 1\n1 7\n");
  try {
    dataio::load_dataset(t.path);
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaError);
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("malformed files are parse errors, missing files schema errors") {
  TempDir t("parse");
  fs::copy(kFixtures / "tiny", t.path, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  write(t.path / "features.csv", "1.0,0.0\n0.5,abc\n0,2\n");
  CHECK(code_of([&] { dataio::load_dataset(t.path); }) == ErrorCode::ParseError);
  fs::copy(kFixtures / "tiny" / "features.csv", t.path / "features.csv", fs::copy_options::overwrite_existing);
  fs::remove(t.path / "labels.csv");
  CHECK(code_of([&] { dataio::load_dataset(t.path); }) == ErrorCode::SchemaError);
  CHECK(code_of([&] { dataio::load_dataset(t.path / "nope"); }) == ErrorCode::SchemaError);
}

TEST_CASE("overlapping splits are rejected") {
  TempDir t("overlap");
  fs::copy(kFixtures / "tiny", t.path, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  write(t.path / "splits.json", R"({"train": [0, 1], "val": [1], "test": []})");
  CHECK(code_of([&] { dataio::load_dataset(t.path); }) == ErrorCode::SchemaError);
}

TEST_CASE("dataset save and load round-trip") {
  TempDir t("roundtrip");
  const auto d = synth::heterophilous(30, 3, 5, 3.0, 2, {3, 5, 0});
  dataio::save_dataset(d, t.path / "a");
  const auto back = dataio::load_dataset(t.path / "a");
  CHECK(same_bits(back.features, d.features));
  CHECK(back.labels == d.labels);
  CHECK(back.edges.canonical().edges == d.edges.canonical().edges);
  CHECK(back.splits[0].train == d.splits[0].train);
  CHECK(back.splits[0].test == d.splits[0].test);
  dataio::save_dataset(back, t.path / "b");
  const auto again = dataio::load_dataset(t.path / "b");
  CHECK(same_bits(again.features, back.features));
  CHECK(again.splits[0].val == back.splits[0].val);
}

TEST_CASE("graph-task datasets round-trip and get stratified folds") {
  TempDir t("graphs");
  dataio::GraphDataset d;
  d.name = "toy-graphs";
  d.task = dataio::TaskKind::Graph;
  const Index graphs = 20, per = 3;
  d.features = testing::random_spd(graphs * per, 1).leftCols(2);
  d.edges.num_nodes = graphs * per;
  for (Index g = 0; g < graphs; ++g) {
    for (Index k = 0; k < per; ++k) d.graph_id.push_back(g);
    d.edges.edges.push_back({g * per, g * per + 1});
    d.labels.push_back(static_cast<int>(g % 2));
  }
  d.splits = dataio::stratified_folds(d.labels, 10, 0);
  d.validate();
  dataio::save_dataset(d, t.path);
  fs::remove(t.path / "splits.json");
  const auto back = dataio::load_dataset(t.path);
  CHECK(back.task == dataio::TaskKind::Graph);
  CHECK(back.num_graphs() == graphs);
  CHECK(back.graph_offsets().back() == graphs * per);
  CHECK(back.splits.size() == 10);

  d.edges.edges.push_back({0, 5});
  CHECK(code_of([&] { d.validate(); }) == ErrorCode::SchemaError);
}

TEST_CASE("stratified folds partition the items") {
  std::vector<int> labels;
  for (int i = 0; i < 53; ++i) labels.push_back(i % 3 == 0 ? 1 : 0);
  const auto folds = dataio::stratified_folds(labels, 10, 5);
  REQUIRE(folds.size() == 10);
  std::multiset<Index> tests;
  for (const auto& f : folds) {
    tests.insert(f.test.begin(), f.test.end());
    std::set<Index> all(f.train.begin(), f.train.end());
    all.insert(f.val.begin(), f.val.end());
    all.insert(f.test.begin(), f.test.end());
    CHECK(all.size() == f.train.size() + f.val.size() + f.test.size());
    CHECK(all.size() == 53);
  }
  CHECK(tests.size() == 53);
  CHECK(std::set<Index>(tests.begin(), tests.end()).size() == 53);
}

TEST_CASE("stratified split sizes") {
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(i % 4);
  const auto s = dataio::stratified_split(labels, 5, 20, 30, 1);
  CHECK(s.train.size() == 20);
  CHECK(s.val.size() == 20);
  CHECK(s.test.size() == 30);
  std::vector<int> per(4, 0);
  for (Index i : s.train) ++per[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
  CHECK(per == std::vector<int>{5, 5, 5, 5});
}

TEST_CASE("feature scaling examples") {
  Matrix x(3, 2);
  x << 3, 4, 0, 1, 0, 0;
  const Matrix s = dataio::scale_features(x);
  CHECK(s(0, 0) == doctest::Approx(0.12));
  CHECK(s(0, 1) == doctest::Approx(0.16));
  CHECK(s(1, 1) == 1.0);
  CHECK(s.row(2).isZero());
  const Matrix n = dataio::scale_features(x, dataio::ScaleMode::Norm);
  CHECK(n(0, 0) == doctest::Approx(0.6));
  CHECK(dataio::scale_features(x, dataio::ScaleMode::None) == x);
}

TEST_CASE("kernel files round-trip bit for bit") {
  TempDir t("kernel");
  const Matrix k = testing::random_spd(10, 3);
  dataio::save_kernel(k, t.path / "k.gdkm");
  CHECK(same_bits(dataio::load_kernel(t.path / "k.gdkm"), k));

  const auto b = kernels::BlockGram::from_full(testing::random_spd(7, 4), 3);
  dataio::save_block_gram(b, t.path / "b.gdkm");
  const auto back = dataio::load_block_gram(t.path / "b.gdkm");
  CHECK(same_bits(back.ii, b.ii));
  CHECK(same_bits(back.ti, b.ti));
  CHECK(same_bits(back.tt_diag, b.tt_diag));
  REQUIRE(back.has_full_tt());
  CHECK(same_bits(*back.tt, *b.tt));

  auto diag_only = b;
  diag_only.tt.reset();
  dataio::save_block_gram(diag_only, t.path / "d.gdkm");
  CHECK_FALSE(dataio::load_block_gram(t.path / "d.gdkm").has_full_tt());

  const std::vector<Matrix> ms{k, Matrix(0, 0), Matrix::Ones(2, 3)};
  dataio::save_matrices(ms, t.path / "m.gdkm");
  const auto mb = dataio::load_matrices(t.path / "m.gdkm");
  REQUIRE(mb.size() == 3);
  CHECK(same_bits(mb[2], ms[2]));
  CHECK(mb[1].size() == 0);
}

TEST_CASE("kernel file corruption") {
  TempDir t("corrupt");
  const fs::path p = t.path / "k.gdkm";
  dataio::save_kernel(testing::random_spd(4, 1), p);
  const auto size = fs::file_size(p);

  fs::resize_file(p, size - 5);
  CHECK(code_of([&] { dataio::load_kernel(p); }) == ErrorCode::ChecksumMismatch);

  dataio::save_kernel(testing::random_spd(4, 1), p);
  {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(20);
    f.put('\x7f');
  }
  CHECK(code_of([&] { dataio::load_kernel(p); }) == ErrorCode::ChecksumMismatch);

  // Header claims 5 x 4 while the payload holds 4 x 4; checksum recomputed.
  dataio::save_kernel(testing::random_spd(4, 1), p);
  std::vector<char> bytes(fs::file_size(p));
  {
    std::ifstream in(p, std::ios::binary);
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  bytes[8] = 5;
  const std::size_t body = bytes.size() - 8;
  const std::uint64_t h = dataio::fnv1a(reinterpret_cast<const std::uint8_t*>(bytes.data()), body);
  std::memcpy(bytes.data() + body, &h, 8);
  {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK(code_of([&] { dataio::load_kernel(p); }) == ErrorCode::SchemaError);

  CHECK(code_of([&] { dataio::load_kernel(t.path / "missing.gdkm"); }) == ErrorCode::IoError);
  write(t.path / "junk.gdkm", "not a kernel file at all");
  const auto junk = code_of([&] { dataio::load_kernel(t.path / "junk.gdkm"); });
  CHECK((junk == ErrorCode::SchemaError || junk == ErrorCode::ChecksumMismatch));
}

TEST_CASE("fnv1a reference vectors") {
  CHECK(dataio::fnv1a(nullptr, 0) == 0xcbf29ce484222325ULL);
  const std::uint8_t a[] = {'a'};
  CHECK(dataio::fnv1a(a, 1) == 0xaf63dc4c8601ec8cULL);
  const std::uint8_t foobar[] = {'f', 'o', 'o', 'b', 'a', 'r'};
  CHECK(dataio::fnv1a(foobar, 6) == 0x85944171f73967e8ULL);
}

TEST_CASE("synthetic generators") {
  const auto het = synth::heterophilous(200, 3, 6, 4.0, 1);
  het.validate();
  CHECK(het.num_classes() == 3);
  CHECK(het.splits[0].train.size() == 60);
  CHECK(het.splits[0].val.size() == 100);
  CHECK(het.splits[0].test.size() == 40);
  for (Index i = 0; i < 200; ++i) {
    Index arg = 0;
    het.features.row(i).head(3).maxCoeff(&arg);
    CHECK(het.labels[static_cast<std::size_t>(i)] == arg);
  }
  const auto hom = synth::homophilous(200, 2, 4, 0.1, 0.005, 1.0, 1);
  CHECK(graph::edge_homophily(hom.edges, hom.labels) > 0.8);
  const auto er = synth::er_two_class(50, 0.1, 0, 1);
  CHECK(er.features.cols() == 50);
  CHECK(er.splits[0].train.size() == 50);
  CHECK(std::count(er.labels.begin(), er.labels.end(), 1) == 25);
}
