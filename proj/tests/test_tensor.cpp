#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "graphood/errors.hpp"
#include "graphood/tensor.hpp"
#include "test_util.hpp"

using namespace graphood;
using testutil::fd_gradient;
using testutil::max_rel_err;
using testutil::random_matrix;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = static_cast<int>(rows.begin()->size());
  Matrix m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

// Reduces an arbitrary tensor to a scalar with fixed weights so that every
// output entry contributes to the adjoint under test.
DiffTensor weighted_scalar(Tape& tape, const DiffTensor& t, const Matrix& weights) {
  DiffTensor w = tape.leaf(weights);
  DiffTensor prod = tape.mul(t, w);
  Mask all(static_cast<size_t>(t.rows()), 1);
  return tape.masked_mean(tape.row_sum(prod), all);
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("matmul values") {
    Tape tape;
    DiffTensor id2 = tape.leaf(mat({{1, 0}, {0, 1}}));
    DiffTensor a = tape.leaf(mat({{1, 2}, {3, 4}}));
    CHECK(tape.matmul(id2, a).value() == a.value());

    DiffTensor row = tape.leaf(mat({{1, 2}}));
    DiffTensor col = tape.leaf(mat({{3}, {4}}));
    CHECK(tape.matmul(row, col).value()(0, 0) == doctest::Approx(11.0).epsilon(1e-15));
  }

  TEST_CASE("matmul shape mismatch names both shapes") {
    Tape tape;
    DiffTensor a = tape.leaf(Matrix::zeros(2, 3));
    DiffTensor b = tape.leaf(Matrix::zeros(2, 3));
    try {
      tape.matmul(a, b);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("2x3") != std::string::npos);
    }
  }

  TEST_CASE("matmul gradient of sum(A*B) wrt A is ones * B^T") {
    std::mt19937_64 rng(11);
    Matrix av = random_matrix(3, 4, rng);
    Matrix bv = random_matrix(4, 2, rng);
    Tape tape;
    DiffTensor a = tape.leaf(av);
    DiffTensor b = tape.leaf(bv);
    DiffTensor prod = tape.matmul(a, b);
    Mask all(3, 1);
    DiffTensor total = tape.masked_mean(tape.row_sum(prod), all);
    tape.backward(total);

    // d mean(sum(AB)) / dA = (1/m) * ones * B^T
    Matrix expected(3, 4);
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 4; ++k) {
        double acc = 0.0;
        for (int j = 0; j < 2; ++j) acc += bv(k, j);
        expected(i, k) = acc / 3.0;
      }
    }
    CHECK(max_rel_err(a.adjoint(), expected) < 1e-12);

    auto f = [&](const Matrix& m) {
      Tape t2;
      DiffTensor a2 = t2.leaf(m);
      DiffTensor b2 = t2.leaf(bv);
      Mask all2(3, 1);
      return t2.masked_mean(t2.row_sum(t2.matmul(a2, b2)), all2).value()(0, 0);
    };
    CHECK(max_rel_err(a.adjoint(), fd_gradient(f, av)) < 1e-6);
  }

  TEST_CASE("spmm: empty operator, hand case, dense agreement") {
    Tape tape;
    SparseMatrix empty;
    empty.n = 3;
    empty.row_offsets.assign(4, 0);
    DiffTensor d = tape.leaf(mat({{1}, {2}, {3}}));
    CHECK(tape.spmm(empty, d).value() == Matrix::zeros(3, 1));

    // 2-node path, row-normalized: P = [[0,1],[1,0]]
    SparseMatrix path = SparseMatrix::from_coo(2, {{0, 1, 1.0}, {1, 0, 1.0}});
    DiffTensor s = tape.leaf(mat({{0}, {2}}));
    Matrix got = tape.spmm(path, s).value();
    CHECK(got(0, 0) == 2.0);
    CHECK(got(1, 0) == 0.0);

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::tuple<int, int, double>> entries;
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 10; ++j) {
          if (coin(rng) < 0.3) entries.emplace_back(i, j, gauss(rng));
        }
      }
      SparseMatrix sp = SparseMatrix::from_coo(10, entries);
      Matrix dense = sp.to_dense();
      Matrix x = random_matrix(10, 4, rng);
      Tape t2;
      Matrix via_sparse = t2.spmm(sp, t2.leaf(x)).value();
      Matrix via_dense = t2.matmul(t2.leaf(dense), t2.leaf(x)).value();
      CHECK(max_rel_err(via_sparse, via_dense) < 1e-12);
    }
  }

  TEST_CASE("row_logsumexp values and stabilization") {
    Tape t;
    DiffTensor a = t.leaf(mat({{0, 0}}));
    CHECK(t.row_logsumexp(a).value()(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

    DiffTensor b = t.leaf(mat({{1000, 1000}}));
    CHECK(t.row_logsumexp(b).value()(0, 0) ==
          doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));

    DiffTensor c = t.leaf(mat({{1, 2, 3}}));
    // direct high-precision evaluation: 3 + log(1 + e^-1 + e^-2)
    const double expected = 3.0 + std::log1p(std::exp(-1.0) + std::exp(-2.0));
    CHECK(std::abs(t.row_logsumexp(c).value()(0, 0) - expected) < 1e-12);
    CHECK(expected == doctest::Approx(3.40760596444438).epsilon(1e-12));

    DiffTensor bad = t.leaf(mat({{std::numeric_limits<double>::infinity(), 0}}));
    CHECK_THROWS_AS(t.row_logsumexp(bad), NumericError);
  }

  TEST_CASE("row_logsumexp shift identity") {
    std::mt19937_64 rng(42);
    for (double s : {-100.0, -3.5, 0.0, 0.25, 100.0}) {
      Matrix z = random_matrix(6, 5, rng, 2.0);
      Matrix zs = z;
      for (long i = 0; i < zs.size(); ++i) zs.data()[i] += s;
      Tape tape;
      Matrix a = tape.row_logsumexp(tape.leaf(z)).value();
      Matrix b = tape.row_logsumexp(tape.leaf(zs)).value();
      for (int i = 0; i < a.rows(); ++i) CHECK(std::abs(b(i, 0) - a(i, 0) - s) < 1e-12);
    }
  }

  TEST_CASE("softmax_cross_entropy values") {
    Tape tape;
    DiffTensor uniform = tape.leaf(Matrix::zeros(2, 4));
    std::vector<int> labels{1, 3};
    Mask all(2, 1);
    CHECK(tape.softmax_cross_entropy(uniform, labels, all).value()(0, 0) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-15));

    DiffTensor sharp = tape.leaf(mat({{10, -10}}));
    std::vector<int> zero{0};
    Mask one(1, 1);
    // direct evaluation oracle: log(1 + e^-20) ~= 2.06e-9
    const double expected = std::log1p(std::exp(-20.0));
    CHECK(std::abs(tape.softmax_cross_entropy(sharp, zero, one).value()(0, 0) - expected) <
          1e-12);
    CHECK(expected == doctest::Approx(2.0611536181902037e-9).epsilon(1e-9));

    CHECK_THROWS_AS(tape.softmax_cross_entropy(uniform, labels, Mask(2, 0)), NumericError);
    std::vector<int> bad{4, 0};
    CHECK_THROWS_AS(tape.softmax_cross_entropy(uniform, bad, all), NumericError);
  }

  TEST_CASE("softmax_cross_entropy gradient vs finite differences") {
    std::mt19937_64 rng(3);
    Matrix z = random_matrix(5, 3, rng);
    std::vector<int> labels{0, 2, 1, 1, 0};
    Mask mask{1, 0, 1, 1, 0};
    Tape tape;
    DiffTensor zt = tape.leaf(z);
    tape.backward(tape.softmax_cross_entropy(zt, labels, mask));
    auto f = [&](const Matrix& m) {
      Tape t2;
      return t2.softmax_cross_entropy(t2.leaf(m), labels, mask).value()(0, 0);
    };
    CHECK(max_rel_err(zt.adjoint(), fd_gradient(f, z)) < 1e-6);
  }

  TEST_CASE("elementwise suite basics") {
    Tape tape;
    DiffTensor x0 = tape.leaf(mat({{-1, 2}}));
    DiffTensor r = tape.relu(x0);
    CHECK(r.value()(0, 0) == 0.0);
    CHECK(r.value()(0, 1) == 2.0);
    Mask one(1, 1);
    tape.backward(tape.masked_mean(tape.row_sum(r), one));
    // adjoint mask [0, 1]
    CHECK(x0.adjoint()(0, 0) == 0.0);
    CHECK(x0.adjoint()(0, 1) == 1.0);

    Tape t2;
    CHECK(t2.row_norm2(t2.leaf(mat({{3, 4}}))).value()(0, 0) == doctest::Approx(5.0));

    // stop_gradient: adjoint of anything downstream of the stop is zero
    Tape t3;
    DiffTensor x = t3.leaf(mat({{2.0}}));
    DiffTensor stopped = t3.stop_gradient(x);
    DiffTensor y = t3.mul(stopped, stopped);
    t3.backward(t3.masked_mean(y, one));
    CHECK(x.adjoint()(0, 0) == 0.0);
    CHECK(stopped.value()(0, 0) == 2.0);
  }

  TEST_CASE("add broadcasting modes and errors") {
    Tape tape;
    DiffTensor a = tape.leaf(mat({{1, 2}, {3, 4}}));
    DiffTensor row = tape.leaf(mat({{10, 20}}));
    DiffTensor scalar = tape.leaf(mat({{100}}));
    CHECK(tape.add(a, row).value() == mat({{11, 22}, {13, 24}}));
    CHECK(tape.add(a, scalar).value() == mat({{101, 102}, {103, 104}}));
    DiffTensor bad = tape.leaf(Matrix::zeros(3, 2));
    CHECK_THROWS_AS(tape.add(a, bad), NumericError);
  }

  TEST_CASE("every differentiable op matches finite differences") {
    // 100 seeded instances spread over the op set
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 2 + static_cast<int>(rng() % 5);
      const int c = 2 + static_cast<int>(rng() % 4);
      Matrix x = random_matrix(n, c, rng);
      // keep relu/abs_clamp inputs away from their kinks
      for (long i = 0; i < x.size(); ++i) {
        if (std::abs(x.data()[i]) < 0.05) x.data()[i] += 0.1;
      }
      Matrix w = random_matrix(n, 1, rng);
      Matrix hadamard = random_matrix(n, c, rng);
      Matrix right = random_matrix(c, 2, rng);
      std::vector<int> gather_idx;
      for (int i = 0; i < n; i += 2) gather_idx.push_back(i);
      SparseMatrix sp = [&] {
        std::vector<std::tuple<int, int, double>> entries;
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            if (coin(rng) < 0.4) entries.emplace_back(i, j, 1.0 + coin(rng));
          }
        }
        return SparseMatrix::from_coo(n, entries);
      }();

      const int which = trial % 14;
      auto build = [&](Tape& tape, const DiffTensor& in) {
        switch (which) {
          case 0: return tape.matmul(in, tape.leaf(right));
          case 1: return tape.spmm(sp, in);
          case 2: return tape.add(in, tape.leaf(Matrix::ones(1, c)));
          case 3: return tape.mul(in, tape.leaf(hadamard));
          case 4: return tape.scale(in, -2.5);
          case 5: return tape.add_const(in, 3.0);
          case 6: return tape.relu(in);
          case 7: return tape.reciprocal(in);
          case 8: return tape.abs_clamp(in, 0.01);
          case 9: return tape.rowwise_scale(in, tape.leaf(w));
          case 10: return tape.row_logsumexp(in);
          case 11: return tape.row_norm2(in);
          case 12: return tape.row_sum(in);
          default: return tape.gather_rows(in, gather_idx);
        }
      };
      auto scalarize = [&](Tape& tape, const DiffTensor& out) {
        Matrix wts = random_matrix(out.rows(), out.cols(), rng);
        return weighted_scalar(tape, out, wts);
      };
      Tape tape;
      DiffTensor in = tape.leaf(x);
      DiffTensor out = build(tape, in);
      Matrix wts = random_matrix(out.rows(), out.cols(), rng);
      tape.backward(weighted_scalar(tape, out, wts));
      auto f = [&](const Matrix& m) {
        Tape t2;
        DiffTensor in2 = t2.leaf(m);
        return weighted_scalar(t2, build(t2, in2), wts).value()(0, 0);
      };
      worst = std::max(worst, max_rel_err(in.adjoint(), fd_gradient(f, x)));
    }
    CHECK(worst < 1e-5);
  }

  TEST_CASE("masked_mean and div_scalar") {
    Tape tape;
    DiffTensor x = tape.leaf(mat({{1}, {5}, {9}}));
    Mask mask{1, 0, 1};
    CHECK(tape.masked_mean(x, mask).value()(0, 0) == 5.0);
    CHECK_THROWS_AS(tape.masked_mean(x, Mask{0, 0, 0}), NumericError);

    DiffTensor denom = tape.leaf(mat({{4.0}}));
    CHECK(tape.div_scalar(x, denom).value()(2, 0) == doctest::Approx(2.25));
    DiffTensor zero = tape.leaf(mat({{0.0}}));
    CHECK_THROWS_AS(tape.div_scalar(x, zero), NumericError);
  }

  TEST_CASE("backward through a 3-op chain matches finite differences") {
    std::mt19937_64 rng(77);
    Matrix x = random_matrix(4, 3, rng);
    for (long i = 0; i < x.size(); ++i) {
      if (std::abs(x.data()[i]) < 0.05) x.data()[i] += 0.1;
    }
    Matrix w = random_matrix(3, 2, rng);
    Mask all(4, 1);
    auto f = [&](const Matrix& m) {
      Tape tape;
      DiffTensor h = tape.relu(tape.leaf(m));
      DiffTensor z = tape.matmul(h, tape.leaf(w));
      return tape.masked_mean(tape.row_logsumexp(z), all).value()(0, 0);
    };
    Tape tape;
    DiffTensor in = tape.leaf(x);
    DiffTensor h = tape.relu(in);
    DiffTensor z = tape.matmul(h, tape.leaf(w));
    tape.backward(tape.masked_mean(tape.row_logsumexp(z), all));
    CHECK(max_rel_err(in.adjoint(), fd_gradient(f, x)) < 1e-5);
  }

  TEST_CASE("adjoint accumulates when a node is used twice") {
    Tape tape;
    DiffTensor x = tape.leaf(mat({{3.0}}));
    DiffTensor y = tape.mul(x, x);  // y = x^2, dy/dx = 2x
    Mask one(1, 1);
    tape.backward(tape.masked_mean(y, one));
    CHECK(x.adjoint()(0, 0) == doctest::Approx(6.0));
  }

  TEST_CASE("adjoints and values always share shape") {
    Tape tape;
    DiffTensor a = tape.leaf(Matrix::zeros(3, 2));
    DiffTensor b = tape.row_sum(a);
    CHECK(a.adjoint().rows() == 3);
    CHECK(a.adjoint().cols() == 2);
    CHECK(b.adjoint().rows() == 3);
    CHECK(b.adjoint().cols() == 1);
  }
}
