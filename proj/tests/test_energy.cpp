#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "graphood/energy.hpp"
#include "graphood/errors.hpp"
#include "graphood/tensor.hpp"
#include "test_util.hpp"

using namespace graphood;
using testutil::make_graph;
using testutil::random_edges;
using testutil::random_matrix;

TEST_SUITE("energy") {
  TEST_CASE("negative_energy basic values") {
    Matrix zeros = Matrix::zeros(1, 5);
    CHECK(negative_energy(zeros).values[0] == doctest::Approx(std::log(5.0)).epsilon(1e-15));

    Matrix single(1, 1);
    single(0, 0) = -3.25;
    CHECK(negative_energy(single).values[0] == doctest::Approx(-3.25).epsilon(1e-15));
    CHECK(negative_energy(single).provenance == ScoreVector::Provenance::RawEnergy);
  }

  TEST_CASE("shift identity over 1000 random rows") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 1000; ++trial) {
      const int c = 2 + static_cast<int>(rng() % 9);
      Matrix z = random_matrix(1, c, rng, 3.0);
      for (double s : {-100.0, -1.0, 0.0, 1.0, 100.0}) {
        Matrix zs = z;
        for (int j = 0; j < c; ++j) zs(0, j) += s;
        const double delta = negative_energy(zs).values[0] - negative_energy(z).values[0];
        CHECK(std::abs(delta - s) < 1e-12);
      }
    }
  }

  TEST_CASE("norm-constrained rows stay inside the log C +- M/sqrt(C) envelope") {
    std::mt19937_64 rng(22);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100000; ++trial) {
      const int c = 2 + static_cast<int>(rng() % 9);
      const double m = 0.1 + 0.7 * (std::sqrt(static_cast<double>(c)) - 0.14) * unit(rng);
      Matrix z(1, c);
      double norm2 = 0.0;
      for (int j = 0; j < c; ++j) {
        z(0, j) = gauss(rng);
        norm2 += z(0, j) * z(0, j);
      }
      const double f = m / std::sqrt(norm2);
      for (int j = 0; j < c; ++j) z(0, j) *= f;
      const double s = negative_energy(z).values[0];
      const double center = std::log(static_cast<double>(c));
      const double radius = m / std::sqrt(static_cast<double>(c));
      REQUIRE(s >= center - radius - 1e-10);
      REQUIRE(s <= center + radius + 1e-10);
    }

    // the constant rows +-(M/sqrt(C)) * 1 attain the bounds
    for (int c : {2, 5, 10}) {
      for (double m : {0.5, 1.0, 2.0}) {
        const double radius = m / std::sqrt(static_cast<double>(c));
        Matrix up(1, c), down(1, c);
        for (int j = 0; j < c; ++j) {
          up(0, j) = radius;
          down(0, j) = -radius;
        }
        const double center = std::log(static_cast<double>(c));
        CHECK(std::abs(negative_energy(up).values[0] - (center + radius)) < 1e-10);
        CHECK(std::abs(negative_energy(down).values[0] - (center - radius)) < 1e-10);
      }
    }
  }

  TEST_CASE("msp values and shift invariance") {
    Matrix uniform = Matrix::zeros(1, 4);
    CHECK(msp_score(uniform).values[0] == doctest::Approx(0.25).epsilon(1e-15));

    Matrix sharp(1, 2);
    sharp(0, 0) = 10.0;
    sharp(0, 1) = -10.0;
    // direct evaluation: 1 / (1 + e^-20)
    CHECK(msp_score(sharp).values[0] ==
          doctest::Approx(1.0 / (1.0 + std::exp(-20.0))).epsilon(1e-15));

    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 200; ++trial) {
      Matrix z = random_matrix(1, 6, rng, 2.0);
      for (double s : {-50.0, 1.0, 50.0}) {
        Matrix zs = z;
        for (int j = 0; j < 6; ++j) zs(0, j) += s;
        CHECK(std::abs(msp_score(zs).values[0] - msp_score(z).values[0]) < 1e-12);
      }
    }
  }

  TEST_CASE("propagate: identity at eta=1 and hand-computed path") {
    GraphDataset path = make_graph(2, {{0, 1}});
    ScoreVector s;
    s.values = {0.0, 2.0};
    ScoreVector same = propagate(s, path, 1.0, 5);
    CHECK(same.values[0] == 0.0);
    CHECK(same.values[1] == 2.0);

    ScoreVector one = propagate(s, path, 0.5, 1);
    CHECK(one.values[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(one.values[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(one.provenance == ScoreVector::Provenance::PropagatedEnergy);
    CHECK(one.hops == 1);

    CHECK_THROWS_AS(propagate(s, path, 1.5, 1), NumericError);
  }

  TEST_CASE("propagation properties over random instances") {
    std::mt19937_64 rng(24);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = 4 + static_cast<int>(rng() % 20);
      GraphDataset g = make_graph(n, random_edges(n, 0.3, rng));
      ScoreVector s;
      s.values.resize(n);
      for (int i = 0; i < n; ++i) s.values[i] = gauss(rng);
      const double eta = unit(rng) * 0.99;  // eta < 1 for the monotone step

      ScoreVector s1 = propagate(s, g, eta, 1);
      const double lo = *std::min_element(s.values.begin(), s.values.end());
      const double hi = *std::max_element(s.values.begin(), s.values.end());
      const std::vector<int> deg = node_degrees(g.adjacency);
      for (int i = 0; i < n; ++i) {
        // convex-combination bound
        REQUIRE(s1.values[i] >= lo - 1e-12);
        REQUIRE(s1.values[i] <= hi + 1e-12);
        if (deg[i] == 0) {
          REQUIRE(s1.values[i] == s.values[i]);
          continue;
        }
        double mean = 0.0;
        for (int k = g.adjacency.row_offsets[i]; k < g.adjacency.row_offsets[i + 1]; ++k) {
          mean += s.values[g.adjacency.col_indices[k]];
        }
        mean /= deg[i];
        // one hop moves the score strictly toward the neighbor mean
        if (mean > s.values[i]) REQUIRE(s1.values[i] > s.values[i]);
        if (mean < s.values[i]) REQUIRE(s1.values[i] < s.values[i]);
      }

      // K hops equal K composed single hops
      const int hops = 1 + static_cast<int>(rng() % 4);
      ScoreVector all_at_once = propagate(s, g, 0.5, hops);
      ScoreVector stepped = s;
      for (int k = 0; k < hops; ++k) stepped = propagate(stepped, g, 0.5, 1);
      for (int i = 0; i < n; ++i) {
        REQUIRE(std::abs(all_at_once.values[i] - stepped.values[i]) < 1e-12);
      }
    }
  }

  TEST_CASE("propagation operator and on-tape propagation agree with the plain version") {
    std::mt19937_64 rng(25);
    const int n = 12;
    GraphDataset g = make_graph(n, random_edges(n, 0.25, rng));
    SparseMatrix prop = propagation_operator(g);
    ScoreVector s;
    s.values.resize(n);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix col(n, 1);
    for (int i = 0; i < n; ++i) {
      s.values[i] = gauss(rng);
      col(i, 0) = s.values[i];
    }
    ScoreVector plain = propagate(s, g, 0.5, 3);
    Tape tape;
    DiffTensor on_tape = propagate_on_tape(tape, tape.leaf(col), prop, 0.5, 3);
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(on_tape.value()(i, 0) - plain.values[i]) < 1e-12);
    }
  }

  TEST_CASE("threshold_at_tpr counting rule") {
    std::vector<double> id;
    for (int i = 1; i <= 20; ++i) id.push_back(static_cast<double>(i));
    CHECK(threshold_at_tpr(id, 0.95) == 2.0);
    long held = 0;
    for (double s : id) {
      if (s >= 2.0) ++held;
    }
    CHECK(held == 19);

    CHECK(threshold_at_tpr(id, 1.0) == 1.0);  // the minimum
    CHECK(threshold_at_tpr({7.5, 7.5, 7.5}, 0.95) == 7.5);
    CHECK_THROWS_AS(threshold_at_tpr({}, 0.95), NumericError);
  }

  TEST_CASE("decide boundary cases") {
    ScoreVector s;
    s.values = {1.0, 1.0 - 1e-9};
    auto d = decide(s, 1.0);
    CHECK(d[0] == 1);  // s == gamma -> in
    CHECK(d[1] == 0);  // s just below gamma -> out
    ScoreVector empty;
    CHECK(decide(empty, 0.0).empty());
  }
}
