#pragma once

#include <string>
#include <vector>

#include "graphood/graph.hpp"
#include "graphood/matrix.hpp"
#include "graphood/tensor.hpp"

namespace graphood {

// Per-node detection scores. Higher score means more in-distribution.
struct ScoreVector {
  enum class Provenance { RawEnergy, PropagatedEnergy, Msp };

  std::vector<double> values;
  Provenance provenance = Provenance::RawEnergy;
  int hops = 0;

  int size() const { return static_cast<int>(values.size()); }
};

std::string provenance_name(ScoreVector::Provenance p);
ScoreVector::Provenance provenance_from_name(const std::string& name);

// s_v = logsumexp(z_v), i.e. the negative energy of the logit row.
ScoreVector negative_energy(const Matrix& logits);

// Maximum softmax probability per row, computed via logsumexp.
ScoreVector msp_score(const Matrix& logits);

// K applications of s <- eta * s + (1 - eta) * P s with P the row-normalized
// adjacency; isolated nodes keep their score unchanged.
ScoreVector propagate(const ScoreVector& s, const GraphDataset& g, double eta, int hops);

// Row-normalized adjacency with identity rows substituted for isolated
// nodes, so that the fused update leaves their score fixed. Used when
// propagation must stay inside a recorded computation.
SparseMatrix propagation_operator(const GraphDataset& g);

// In-tape version of propagate over an n x 1 score tensor; prop must come
// from propagation_operator and outlive the tape.
DiffTensor propagate_on_tape(Tape& tape, const DiffTensor& scores, const SparseMatrix& prop,
                             double eta, int hops);

// Smallest threshold gamma such that at least ceil(tpr * n) ID scores
// satisfy s >= gamma; see the counting rule in the tests.
double threshold_at_tpr(const std::vector<double>& id_scores, double tpr);

// 1 = in-distribution (s >= gamma), 0 = out.
std::vector<std::uint8_t> decide(const ScoreVector& s, double gamma);

}  // namespace graphood
