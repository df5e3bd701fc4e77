#include "graphood/model.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "graphood/energy.hpp"
#include "graphood/errors.hpp"

namespace graphood {

namespace {

Matrix glorot_uniform(int rows, int cols, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> dist(-a, a);
  Matrix w(rows, cols);
  for (long i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

void adam_update_one(Matrix& w, AdamMoments& mom, const Matrix& grad, const char* name,
                     double lr, double beta1, double beta2, double eps, double weight_decay,
                     long step) {
  if (!grad.same_shape(w)) {
    throw NumericError(std::string("adam_step: gradient shape mismatch for ") + name);
  }
  if (!grad.all_finite()) {
    throw NumericError(std::string("adam_step: non-finite gradient for ") + name);
  }
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (long i = 0; i < w.size(); ++i) {
    const double g = grad.data()[i];
    double& m = mom.m.data()[i];
    double& v = mom.v.data()[i];
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    w.data()[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + weight_decay * w.data()[i]);
  }
}

}  // namespace

ModelParams init_model(int in_dim, int hidden_dim, int num_classes, std::uint64_t seed) {
  if (in_dim <= 0 || hidden_dim <= 0 || num_classes <= 0) {
    throw NumericError("init_model: dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.in_dim = in_dim;
  p.hidden_dim = hidden_dim;
  p.num_classes = num_classes;
  p.w0 = glorot_uniform(in_dim, hidden_dim, rng);
  p.b0 = Matrix::zeros(1, hidden_dim);
  p.w1 = glorot_uniform(hidden_dim, num_classes, rng);
  p.b1 = Matrix::zeros(1, num_classes);
  p.m_w0 = {Matrix::zeros(in_dim, hidden_dim), Matrix::zeros(in_dim, hidden_dim)};
  p.m_b0 = {Matrix::zeros(1, hidden_dim), Matrix::zeros(1, hidden_dim)};
  p.m_w1 = {Matrix::zeros(hidden_dim, num_classes), Matrix::zeros(hidden_dim, num_classes)};
  p.m_b1 = {Matrix::zeros(1, num_classes), Matrix::zeros(1, num_classes)};
  return p;
}

ParamLeaves bind_params(Tape& tape, const ModelParams& params) {
  return ParamLeaves{tape.leaf(params.w0), tape.leaf(params.b0), tape.leaf(params.w1),
                     tape.leaf(params.b1)};
}

DiffTensor gcn_forward(Tape& tape, const ParamLeaves& leaves, const Matrix& features,
                       const SparseMatrix& a_hat) {
  if (features.cols() != leaves.w0.rows()) {
    throw NumericError("gcn_forward: features " + features.shape_str() + " vs W0 " +
                       leaves.w0.value().shape_str());
  }
  DiffTensor x = tape.leaf(features);
  DiffTensor h = tape.spmm(a_hat, x);
  h = tape.add(tape.matmul(h, leaves.w0), leaves.b0);
  h = tape.relu(h);
  h = tape.spmm(a_hat, h);
  return tape.add(tape.matmul(h, leaves.w1), leaves.b1);
}

Matrix forward_logits(const ModelParams& params, const Matrix& features,
                      const SparseMatrix& a_hat) {
  Tape tape;
  ParamLeaves leaves = bind_params(tape, params);
  return gcn_forward(tape, leaves, features, a_hat).value();
}

ParamGrads collect_grads(const ParamLeaves& leaves) {
  return ParamGrads{leaves.w0.adjoint(), leaves.b0.adjoint(), leaves.w1.adjoint(),
                    leaves.b1.adjoint()};
}

void adam_step(ModelParams& params, const ParamGrads& grads, double lr, double beta1,
               double beta2, double eps, double weight_decay) {
  params.step += 1;
  adam_update_one(params.w0, params.m_w0, grads.w0, "W0", lr, beta1, beta2, eps, weight_decay,
                  params.step);
  adam_update_one(params.b0, params.m_b0, grads.b0, "b0", lr, beta1, beta2, eps, 0.0,
                  params.step);
  adam_update_one(params.w1, params.m_w1, grads.w1, "W1", lr, beta1, beta2, eps, weight_decay,
                  params.step);
  adam_update_one(params.b1, params.m_b1, grads.b1, "b1", lr, beta1, beta2, eps, 0.0,
                  params.step);
}

TrainState train_model(const GraphDataset& g, const RunConfig& cfg) {
  cfg.validate();
  g.validate();
  if (mask_to_indices(g.train_mask).empty()) throw DataError("dataset has no training nodes");
  if (mask_to_indices(g.val_mask).empty()) throw DataError("dataset has no validation nodes");
  if (cfg.exposure && mask_to_indices(g.expose_ood_mask).empty()) {
    throw DataError("exposure enabled but the dataset has an empty expose_ood mask");
  }

  TrainState state;
  state.seed = cfg.seed;
  state.a_hat = sym_normalize(g);
  state.prop = propagation_operator(g);
  state.params = init_model(g.num_features, cfg.hidden, g.num_classes, cfg.seed);
  state.best_val_nll = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    ParamLeaves leaves = bind_params(tape, state.params);
    DiffTensor z = gcn_forward(tape, leaves, g.features, state.a_hat);
    TotalLoss loss = total_loss(tape, z, g, cfg, epoch, state.prop);
    if (!std::isfinite(loss.breakdown.total)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch));
    }

    const double val_nll = cross_entropy_value(z.value(), g.labels, g.val_mask);
    if (val_nll < state.best_val_nll) {
      state.best_val_nll = val_nll;
      state.best_epoch = epoch;
      state.best_params = state.params;
    }
    state.log.push_back(EpochRecord{epoch, loss.breakdown, val_nll});

    tape.backward(loss.node);
    adam_step(state.params, collect_grads(leaves), cfg.lr);
    state.epoch = epoch + 1;
  }
  return state;
}

}  // namespace graphood
