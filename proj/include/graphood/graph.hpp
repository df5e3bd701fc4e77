#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graphood/matrix.hpp"

namespace graphood {

using Mask = std::vector<std::uint8_t>;

// Node classification graph with role masks. Immutable after load; labels
// use -1 for unlabeled/OOD nodes, the masks are authoritative for roles.
struct GraphDataset {
  int num_nodes = 0;
  int num_features = 0;
  int num_classes = 0;
  SparseMatrix adjacency;  // symmetric, zero diagonal, unweighted (all 1s)
  Matrix features;         // num_nodes x num_features
  std::vector<int> labels;
  Mask train_mask, val_mask, test_id_mask, test_ood_mask, expose_ood_mask;

  // Checks adjacency symmetry, label ranges on labeled roles and mask
  // disjointness; throws DataError on violation.
  void validate() const;
};

// Dataset directory format: graph.json, edges.csv, features.csv, labels.csv,
// masks.csv. Text, UTF-8, LF newlines. See README for the exact schema.
GraphDataset load_dataset(const std::string& dir);
void save_dataset(const GraphDataset& g, const std::string& dir);

// D~^{-1/2} (A + I) D~^{-1/2} with D~ the degree of A + I.
SparseMatrix sym_normalize(const GraphDataset& g);
// D^{-1} A without self-loops; rows of isolated nodes are all-zero.
SparseMatrix row_normalize(const GraphDataset& g);

// Builds a symmetric unweighted adjacency from an undirected edge list
// (each edge listed once, no self-loops, no duplicates).
SparseMatrix adjacency_from_edges(int n, const std::vector<std::pair<int, int>>& edges);

std::vector<int> mask_to_indices(const Mask& mask);
std::vector<int> node_degrees(const SparseMatrix& adjacency);

}  // namespace graphood
