#pragma once

#include <vector>

#include "graphood/config.hpp"
#include "graphood/graph.hpp"
#include "graphood/tensor.hpp"

namespace graphood {

// Values of the individual objective terms for one forward pass, together
// with the weights that combined them. Inactive terms are exactly 0, so
// total == nll + alpha * reg + lambda2 * (lambda1 * uniform +
// (1 - lambda1) * bound) always holds.
struct LossBreakdown {
  double nll = 0.0;
  double reg = 0.0;
  double bound = 0.0;
  double uniform = 0.0;
  double ub = 0.0;
  double total = 0.0;
  double alpha = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

struct TotalLoss {
  LossBreakdown breakdown;
  DiffTensor node;  // scalar tape node to run backward on
};

// Mean cross-entropy over the masked rows.
DiffTensor nll_loss(Tape& tape, const DiffTensor& z, const std::vector<int>& labels,
                    const Mask& mask);

// Squared hinge on energies E = -score: mean over ID of max(0, E - m_in)^2
// plus mean over exposed OOD of max(0, m_out - E)^2. Inputs are negative-
// energy score columns for the two node sets.
DiffTensor hinge_reg(Tape& tape, const DiffTensor& neg_e_in, const DiffTensor& neg_e_out,
                     double m_in, double m_out);

// Variance of the logit 2-norms over node_set divided by their mean norm
// (the mean acting as a stop-gradient scale). All-zero logits are degenerate
// and yield a constant 0.
DiffTensor bound_loss(Tape& tape, const DiffTensor& z, const Mask& node_set);

// Variance of logit row sums within each group, scaled by the group's
// |mean row sum| (stop-gradient, clamped below at 1e-8). The OOD group is
// included only when ood_set is nonempty.
DiffTensor uniform_loss(Tape& tape, const DiffTensor& z, const Mask& id_set, const Mask& ood_set);

// lambda1 * uniform + (1 - lambda1) * bound, with bound taken over
// id_set union ood_set.
DiffTensor ub_loss(Tape& tape, const DiffTensor& z, const Mask& id_set, const Mask& ood_set,
                   double lambda1);

// Cross-entropy on rows rescaled to z / (tau * ||z||).
DiffTensor logitnorm_loss(Tape& tape, const DiffTensor& z, const std::vector<int>& labels,
                          const Mask& mask, double tau);

// Full objective for the configured method at the given epoch. prop must be
// the dataset's propagation_operator (used when reg_on_propagated is set)
// and must outlive the tape.
TotalLoss total_loss(Tape& tape, const DiffTensor& z, const GraphDataset& g,
                     const RunConfig& cfg, int epoch, const SparseMatrix& prop);

// Analytic gradients used as an independent check on the autodiff path.
// Both differentiate variance/mean with the mean treated as a constant
// scale, expanded term by term rather than via the summed shortcut.
Matrix bound_loss_grad(const Matrix& z, const Mask& node_set);
Matrix uniform_loss_grad(const Matrix& z, const Mask& id_set, const Mask& ood_set);

// Plain (tape-free) evaluation of the masked mean cross-entropy, used for
// validation-loss tracking.
double cross_entropy_value(const Matrix& z, const std::vector<int>& labels, const Mask& mask);

}  // namespace graphood
