#pragma once

#include <cstdint>
#include <vector>

#include "graphood/config.hpp"
#include "graphood/graph.hpp"
#include "graphood/losses.hpp"
#include "graphood/matrix.hpp"
#include "graphood/tensor.hpp"

namespace graphood {

struct AdamMoments {
  Matrix m;
  Matrix v;
};

// Two-layer GCN parameters plus Adam state. Weight shapes are
// W0: d x h, b0: 1 x h, W1: h x C, b1: 1 x C.
struct ModelParams {
  int in_dim = 0;
  int hidden_dim = 0;
  int num_classes = 0;
  Matrix w0, b0, w1, b1;
  AdamMoments m_w0, m_b0, m_w1, m_b1;
  long step = 0;

  bool operator==(const ModelParams& other) const {
    return w0 == other.w0 && b0 == other.b0 && w1 == other.w1 && b1 == other.b1;
  }
};

// Glorot-uniform weights from the seeded generator, zero biases.
ModelParams init_model(int in_dim, int hidden_dim, int num_classes, std::uint64_t seed);

struct ParamLeaves {
  DiffTensor w0, b0, w1, b1;
};

ParamLeaves bind_params(Tape& tape, const ModelParams& params);

// Z = A_hat * relu(A_hat * X * W0 + b0) * W1 + b1
DiffTensor gcn_forward(Tape& tape, const ParamLeaves& leaves, const Matrix& features,
                       const SparseMatrix& a_hat);

// Convenience: run the forward pass on a scratch tape and return the logits.
Matrix forward_logits(const ModelParams& params, const Matrix& features,
                      const SparseMatrix& a_hat);

struct ParamGrads {
  Matrix w0, b0, w1, b1;
};

// Reads d(loss)/d(param) off the tape after backward().
ParamGrads collect_grads(const ParamLeaves& leaves);

// Adam with decoupled weight decay on the weight matrices (not biases).
// Non-finite gradients are a hard error naming the parameter.
void adam_step(ModelParams& params, const ParamGrads& grads, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
               double weight_decay = 5e-4);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown losses;
  double val_nll = 0.0;
};

// Training state: current parameters plus the snapshot taken at the epoch
// with the lowest validation classification loss.
struct TrainState {
  ModelParams params;
  ModelParams best_params;
  double best_val_nll = 0.0;
  int best_epoch = -1;
  int epoch = 0;
  std::uint64_t seed = 0;
  SparseMatrix a_hat;  // cached sym-normalized adjacency
  SparseMatrix prop;   // cached propagation operator
  std::vector<EpochRecord> log;
};

// Full-batch training for cfg.epochs epochs.
TrainState train_model(const GraphDataset& g, const RunConfig& cfg);

}  // namespace graphood
