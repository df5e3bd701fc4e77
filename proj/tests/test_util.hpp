#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "graphood/graph.hpp"
#include "graphood/matrix.hpp"

namespace graphood::testutil {

inline Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Matrix m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
  return m;
}

// Central finite differences of a scalar function of a matrix input.
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                          double step = 1e-6) {
  Matrix grad(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) {
      Matrix xp = x, xm = x;
      xp(i, j) += step;
      xm(i, j) -= step;
      grad(i, j) = (f(xp) - f(xm)) / (2.0 * step);
    }
  }
  return grad;
}

inline double max_rel_err(const Matrix& a, const Matrix& b, double floor = 1.0) {
  double worst = 0.0;
  for (long i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], y = b.data()[i];
    worst = std::max(worst, std::abs(x - y) / std::max({floor, std::abs(x), std::abs(y)}));
  }
  return worst;
}

// Minimal valid dataset around an explicit edge list; labels default to 0
// and every node is a train node unless remasked by the caller.
inline GraphDataset make_graph(int n, const std::vector<std::pair<int, int>>& edges,
                               int num_classes = 2, int num_features = 1) {
  GraphDataset g;
  g.num_nodes = n;
  g.num_features = num_features;
  g.num_classes = num_classes;
  g.features = Matrix(n, num_features);
  g.labels.assign(n, 0);
  g.adjacency = adjacency_from_edges(n, edges);
  g.train_mask.assign(n, 1);
  g.val_mask.assign(n, 0);
  g.test_id_mask.assign(n, 0);
  g.test_ood_mask.assign(n, 0);
  g.expose_ood_mask.assign(n, 0);
  return g;
}

inline std::vector<std::pair<int, int>> random_edges(int n, double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (coin(rng) < p) edges.emplace_back(i, j);
    }
  }
  return edges;
}

}  // namespace graphood::testutil
