#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "graphood/errors.hpp"
#include "graphood/graph.hpp"
#include "test_util.hpp"

using namespace graphood;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("graphood_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

void write_toy_dataset(const fs::path& dir) {
  write_file(dir / "graph.json", R"({"num_nodes":2,"num_features":2,"num_classes":2})");
  write_file(dir / "edges.csv", "0,1\n");
  write_file(dir / "features.csv", "1.5,-2.25\n0.125,3\n");
  write_file(dir / "labels.csv", "0\n1\n");
  write_file(dir / "masks.csv", "train,val,test_id,test_ood,expose_ood\n1,0,0,0,0\n0,1,0,0,0\n");
}

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("load toy directory") {
    fs::path dir = temp_dir("toy");
    write_toy_dataset(dir);
    GraphDataset g = load_dataset(dir.string());
    CHECK(g.num_nodes == 2);
    CHECK(g.adjacency.nnz() == 2);  // symmetrized single edge
    CHECK(g.features(0, 1) == -2.25);
    CHECK(g.labels[1] == 1);
    CHECK(g.train_mask[0] == 1);
    CHECK(g.val_mask[1] == 1);
  }

  TEST_CASE("distinct load errors carry file context") {
    fs::path dir = temp_dir("errors");
    write_toy_dataset(dir);
    fs::remove(dir / "masks.csv");
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()), doctest::Contains("masks.csv"), DataError);

    write_toy_dataset(dir);
    write_file(dir / "labels.csv", "0\n7\n");  // C = 2
    try {
      load_dataset(dir.string());
      FAIL("expected label range error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("labels.csv:2") != std::string::npos);
      CHECK(std::string(e.what()).find("7") != std::string::npos);
    }

    write_toy_dataset(dir);
    write_file(dir / "features.csv", "1,2\n");  // wrong row count
    CHECK_THROWS_AS(load_dataset(dir.string()), DataError);

    write_toy_dataset(dir);
    write_file(dir / "masks.csv",
               "train,val,test_id,test_ood,expose_ood\n1,1,0,0,0\n0,1,0,0,0\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()), doctest::Contains("at most one role"),
                         DataError);

    write_toy_dataset(dir);
    write_file(dir / "edges.csv", "0,0\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()), doctest::Contains("self-loop"), DataError);

    write_toy_dataset(dir);
    write_file(dir / "edges.csv", "0,1\n1,0\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()), doctest::Contains("duplicate"), DataError);
  }

  TEST_CASE("save then load is the identity") {
    std::mt19937_64 rng(17);
    GraphDataset g = testutil::make_graph(6, {{0, 1}, {1, 2}, {2, 3}, {4, 5}, {0, 5}}, 3, 4);
    g.features = testutil::random_matrix(6, 4, rng);
    g.labels = {0, 1, 2, -1, 0, -1};
    g.train_mask = {1, 1, 0, 0, 0, 0};
    g.val_mask = {0, 0, 1, 0, 0, 0};
    g.test_id_mask = {0, 0, 0, 0, 1, 0};
    g.test_ood_mask = {0, 0, 0, 1, 0, 0};
    g.expose_ood_mask = {0, 0, 0, 0, 0, 1};

    fs::path dir = temp_dir("roundtrip");
    save_dataset(g, dir.string());
    GraphDataset h = load_dataset(dir.string());
    CHECK(h.features == g.features);  // bit-exact
    CHECK(h.labels == g.labels);
    CHECK(h.adjacency.col_indices == g.adjacency.col_indices);
    CHECK(h.adjacency.row_offsets == g.adjacency.row_offsets);
    CHECK(h.adjacency.values == g.adjacency.values);
    CHECK(h.train_mask == g.train_mask);
    CHECK(h.expose_ood_mask == g.expose_ood_mask);

    // loading does not mutate files: load twice, identical result
    GraphDataset h2 = load_dataset(dir.string());
    CHECK(h2.features == h.features);
  }

  TEST_CASE("sym_normalize") {
    GraphDataset isolated = testutil::make_graph(1, {});
    SparseMatrix s = sym_normalize(isolated);
    CHECK(s.nnz() == 1);
    CHECK(s.values[0] == doctest::Approx(1.0).epsilon(1e-15));

    GraphDataset path = testutil::make_graph(2, {{0, 1}});
    SparseMatrix p = sym_normalize(path);
    Matrix d = p.to_dense();
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) CHECK(d(i, j) == doctest::Approx(0.5).epsilon(1e-15));
    }

    // k-regular ring: every row of the normalized operator sums to 1
    const int n = 8;
    std::vector<std::pair<int, int>> ring;
    for (int i = 0; i < n; ++i) ring.emplace_back(i, (i + 1) % n);
    GraphDataset reg = testutil::make_graph(n, ring);
    SparseMatrix r = sym_normalize(reg);
    Matrix rd = r.to_dense();
    for (int i = 0; i < n; ++i) {
      double sum = 0.0;
      for (int j = 0; j < n; ++j) sum += rd(i, j);
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }

    // symmetry within 1e-12
    std::mt19937_64 rng(9);
    GraphDataset rand = testutil::make_graph(10, testutil::random_edges(10, 0.3, rng));
    Matrix m = sym_normalize(rand).to_dense();
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j) CHECK(std::abs(m(i, j) - m(j, i)) < 1e-12);
    }
  }

  TEST_CASE("row_normalize") {
    GraphDataset g = testutil::make_graph(4, {{0, 1}, {0, 2}});
    SparseMatrix p = row_normalize(g);
    Matrix d = p.to_dense();
    CHECK(d(0, 1) == doctest::Approx(0.5));
    CHECK(d(0, 2) == doctest::Approx(0.5));
    // isolated node 3: all-zero row
    for (int j = 0; j < 4; ++j) CHECK(d(3, j) == 0.0);

    std::mt19937_64 rng(10);
    GraphDataset rand = testutil::make_graph(12, testutil::random_edges(12, 0.25, rng));
    Matrix m = row_normalize(rand).to_dense();
    std::vector<int> deg = node_degrees(rand.adjacency);
    for (int i = 0; i < 12; ++i) {
      double sum = 0.0;
      for (int j = 0; j < 12; ++j) sum += m(i, j);
      if (deg[i] == 0) {
        CHECK(sum == 0.0);
      } else {
        CHECK(std::abs(sum - 1.0) < 1e-12);
      }
    }
  }

  TEST_CASE("validate rejects asymmetric adjacency and mask overlap") {
    GraphDataset g = testutil::make_graph(3, {{0, 1}});
    g.adjacency = SparseMatrix::from_coo(3, {{0, 1, 1.0}});  // missing mirror
    CHECK_THROWS_AS(g.validate(), DataError);

    GraphDataset h = testutil::make_graph(3, {{0, 1}});
    h.test_ood_mask[0] = 1;  // also train
    CHECK_THROWS_AS(h.validate(), DataError);

    GraphDataset k = testutil::make_graph(3, {{0, 1}});
    k.labels[0] = -1;  // train node without label
    CHECK_THROWS_AS(k.validate(), DataError);
  }
}
