#include "graphood/energy.hpp"

#include <algorithm>
#include <cmath>

#include "graphood/errors.hpp"

namespace graphood {

std::string provenance_name(ScoreVector::Provenance p) {
  switch (p) {
    case ScoreVector::Provenance::RawEnergy: return "raw-energy";
    case ScoreVector::Provenance::PropagatedEnergy: return "propagated-energy";
    case ScoreVector::Provenance::Msp: return "msp";
  }
  return "unknown";
}

ScoreVector::Provenance provenance_from_name(const std::string& name) {
  if (name == "raw-energy") return ScoreVector::Provenance::RawEnergy;
  if (name == "propagated-energy") return ScoreVector::Provenance::PropagatedEnergy;
  if (name == "msp") return ScoreVector::Provenance::Msp;
  throw DataError("unknown score provenance '" + name + "'");
}

namespace {

double row_lse(const double* row, int c) {
  double m = row[0];
  for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
  double acc = 0.0;
  for (int j = 0; j < c; ++j) acc += std::exp(row[j] - m);
  return m + std::log(acc);
}

}  // namespace

ScoreVector negative_energy(const Matrix& logits) {
  if (logits.cols() < 1) throw NumericError("negative_energy: need at least one class");
  if (!logits.all_finite()) throw NumericError("negative_energy: non-finite logits");
  ScoreVector s;
  s.provenance = ScoreVector::Provenance::RawEnergy;
  s.values.resize(logits.rows());
  for (int i = 0; i < logits.rows(); ++i) s.values[i] = row_lse(logits.row(i), logits.cols());
  return s;
}

ScoreVector msp_score(const Matrix& logits) {
  if (logits.cols() < 1) throw NumericError("msp_score: need at least one class");
  if (!logits.all_finite()) throw NumericError("msp_score: non-finite logits");
  ScoreVector s;
  s.provenance = ScoreVector::Provenance::Msp;
  s.values.resize(logits.rows());
  for (int i = 0; i < logits.rows(); ++i) {
    const double* row = logits.row(i);
    double m = row[0];
    for (int j = 1; j < logits.cols(); ++j) m = std::max(m, row[j]);
    // max softmax = exp(max - logsumexp)
    s.values[i] = std::exp(m - row_lse(row, logits.cols()));
  }
  return s;
}

ScoreVector propagate(const ScoreVector& s, const GraphDataset& g, double eta, int hops) {
  if (eta < 0.0 || eta > 1.0) throw NumericError("propagate: eta must lie in [0,1]");
  if (hops < 0) throw NumericError("propagate: hops must be nonnegative");
  if (s.size() != g.num_nodes) {
    throw NumericError("propagate: score length " + std::to_string(s.size()) +
                       " vs " + std::to_string(g.num_nodes) + " nodes");
  }
  const SparseMatrix p = row_normalize(g);
  const std::vector<int> deg = node_degrees(g.adjacency);
  ScoreVector out = s;
  if (out.provenance == ScoreVector::Provenance::RawEnergy && hops > 0) {
    out.provenance = ScoreVector::Provenance::PropagatedEnergy;
  }
  out.hops = s.hops + hops;
  std::vector<double> next(out.values.size());
  for (int k = 0; k < hops; ++k) {
    for (int i = 0; i < p.n; ++i) {
      if (deg[i] == 0) {
        next[i] = out.values[i];  // no neighbors: keep the score
        continue;
      }
      double neigh = 0.0;
      for (int e = p.row_offsets[i]; e < p.row_offsets[i + 1]; ++e) {
        neigh += p.values[e] * out.values[p.col_indices[e]];
      }
      next[i] = eta * out.values[i] + (1.0 - eta) * neigh;
    }
    out.values = next;
  }
  return out;
}

SparseMatrix propagation_operator(const GraphDataset& g) {
  SparseMatrix p = row_normalize(g);
  const std::vector<int> deg = node_degrees(g.adjacency);
  std::vector<std::tuple<int, int, double>> entries;
  entries.reserve(p.nnz() + g.num_nodes);
  for (int i = 0; i < p.n; ++i) {
    if (deg[i] == 0) {
      entries.emplace_back(i, i, 1.0);
      continue;
    }
    for (int k = p.row_offsets[i]; k < p.row_offsets[i + 1]; ++k) {
      entries.emplace_back(i, p.col_indices[k], p.values[k]);
    }
  }
  return SparseMatrix::from_coo(p.n, std::move(entries));
}

DiffTensor propagate_on_tape(Tape& tape, const DiffTensor& scores, const SparseMatrix& prop,
                             double eta, int hops) {
  if (eta < 0.0 || eta > 1.0) throw NumericError("propagate_on_tape: eta must lie in [0,1]");
  DiffTensor s = scores;
  for (int k = 0; k < hops; ++k) {
    s = tape.add(tape.scale(s, eta), tape.scale(tape.spmm(prop, s), 1.0 - eta));
  }
  return s;
}

double threshold_at_tpr(const std::vector<double>& id_scores, double tpr) {
  if (id_scores.empty()) throw NumericError("threshold_at_tpr: empty ID scores");
  if (tpr < 0.0 || tpr > 1.0) throw NumericError("threshold_at_tpr: tpr must lie in [0,1]");
  std::vector<double> sorted = id_scores;
  std::sort(sorted.begin(), sorted.end());
  const long n = static_cast<long>(sorted.size());
  // Index of the smallest admissible threshold; the tiny slack keeps exact
  // products like 0.05 * 20 from ceiling up a rank.
  const long k = static_cast<long>(std::ceil((1.0 - tpr) * static_cast<double>(n) - 1e-9));
  const long idx = k + 1;
  if (idx >= 1 && idx <= n) return sorted[idx - 1];
  return sorted[0];
}

std::vector<std::uint8_t> decide(const ScoreVector& s, double gamma) {
  std::vector<std::uint8_t> out(s.values.size());
  for (size_t i = 0; i < s.values.size(); ++i) out[i] = s.values[i] >= gamma ? 1 : 0;
  return out;
}

}  // namespace graphood
