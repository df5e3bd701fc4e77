#include "graphood/losses.hpp"

#include <cmath>
#include <iostream>

#include "graphood/energy.hpp"
#include "graphood/errors.hpp"

namespace graphood {

namespace {

constexpr double kSumScaleFloor = 1e-8;

Mask mask_union(const Mask& a, const Mask& b) {
  Mask out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = (a[i] || b[i]) ? 1 : 0;
  return out;
}

bool mask_empty(const Mask& m) {
  for (auto v : m) {
    if (v) return false;
  }
  return true;
}

// variance of x over the masked rows divided by the stop-gradient scale
// derived from the masked mean of x (identity for bound, |.| clamp for
// uniform).
DiffTensor scaled_variance(Tape& tape, const DiffTensor& x, const Mask& set, bool abs_scale) {
  DiffTensor mean = tape.masked_mean(x, set);
  DiffTensor diff = tape.sub(x, mean);  // scalar broadcast
  DiffTensor var = tape.masked_mean(tape.mul(diff, diff), set);
  DiffTensor scale = tape.stop_gradient(mean);
  if (abs_scale) scale = tape.abs_clamp(scale, kSumScaleFloor);
  return tape.div_scalar(var, scale);
}

}  // namespace

DiffTensor nll_loss(Tape& tape, const DiffTensor& z, const std::vector<int>& labels,
                    const Mask& mask) {
  return tape.softmax_cross_entropy(z, labels, mask);
}

DiffTensor hinge_reg(Tape& tape, const DiffTensor& neg_e_in, const DiffTensor& neg_e_out,
                     double m_in, double m_out) {
  if (neg_e_in.rows() == 0 || neg_e_out.rows() == 0) {
    throw DataError("hinge_reg: both the ID and the exposed OOD set must be nonempty");
  }
  const Mask all_in(neg_e_in.rows(), 1);
  const Mask all_out(neg_e_out.rows(), 1);
  // E = -score, so E_in - m_in = -(s_in) - m_in and m_out - E_out = m_out + s_out.
  DiffTensor over_in = tape.relu(tape.add_const(tape.scale(neg_e_in, -1.0), -m_in));
  DiffTensor over_out = tape.relu(tape.add_const(neg_e_out, m_out));
  DiffTensor term_in = tape.masked_mean(tape.mul(over_in, over_in), all_in);
  DiffTensor term_out = tape.masked_mean(tape.mul(over_out, over_out), all_out);
  return tape.add(term_in, term_out);
}

DiffTensor bound_loss(Tape& tape, const DiffTensor& z, const Mask& node_set) {
  if (mask_empty(node_set)) throw NumericError("bound_loss: empty node set");
  DiffTensor norms = tape.row_norm2(z);
  // Degenerate all-zero logits: the mean norm vanishes and the objective is
  // defined as 0 with no gradient.
  double mean = 0.0;
  long count = 0;
  for (size_t i = 0; i < node_set.size(); ++i) {
    if (node_set[i]) {
      mean += norms.value()(static_cast<int>(i), 0);
      ++count;
    }
  }
  if (mean / static_cast<double>(count) == 0.0) {
    std::cerr << "[graphood] bound_loss: all-zero logits over the node set, "
                 "returning degenerate 0\n";
    return tape.leaf(Matrix::zeros(1, 1));
  }
  return scaled_variance(tape, norms, node_set, /*abs_scale=*/false);
}

DiffTensor uniform_loss(Tape& tape, const DiffTensor& z, const Mask& id_set, const Mask& ood_set) {
  if (mask_empty(id_set)) throw NumericError("uniform_loss: empty ID set");
  DiffTensor sums = tape.row_sum(z);
  // Warn once per call when a group's mean row sum sits inside the clamp.
  auto check_scale = [&](const Mask& set, const char* which) {
    double mean = 0.0;
    long count = 0;
    for (size_t i = 0; i < set.size(); ++i) {
      if (set[i]) {
        mean += sums.value()(static_cast<int>(i), 0);
        ++count;
      }
    }
    if (std::abs(mean / static_cast<double>(count)) < kSumScaleFloor) {
      std::cerr << "[graphood] uniform_loss: " << which
                << " mean row sum below " << kSumScaleFloor << ", clamping scale\n";
    }
  };
  check_scale(id_set, "ID");
  DiffTensor loss = scaled_variance(tape, sums, id_set, /*abs_scale=*/true);
  if (!mask_empty(ood_set)) {
    check_scale(ood_set, "OOD");
    loss = tape.add(loss, scaled_variance(tape, sums, ood_set, /*abs_scale=*/true));
  }
  return loss;
}

DiffTensor ub_loss(Tape& tape, const DiffTensor& z, const Mask& id_set, const Mask& ood_set,
                   double lambda1) {
  DiffTensor uniform = uniform_loss(tape, z, id_set, ood_set);
  DiffTensor bound = bound_loss(tape, z, mask_union(id_set, ood_set));
  return tape.add(tape.scale(uniform, lambda1), tape.scale(bound, 1.0 - lambda1));
}

DiffTensor logitnorm_loss(Tape& tape, const DiffTensor& z, const std::vector<int>& labels,
                          const Mask& mask, double tau) {
  if (tau <= 0.0) throw NumericError("logitnorm_loss: tau must be positive");
  DiffTensor norms = tape.row_norm2(z);
  DiffTensor inv = tape.reciprocal(tape.abs_clamp(tape.scale(norms, tau), 1e-12));
  DiffTensor normalized = tape.rowwise_scale(z, inv);
  return tape.softmax_cross_entropy(normalized, labels, mask);
}

TotalLoss total_loss(Tape& tape, const DiffTensor& z, const GraphDataset& g,
                     const RunConfig& cfg, int epoch, const SparseMatrix& prop) {
  const Method method = cfg.parsed_method();
  TotalLoss result;
  LossBreakdown& b = result.breakdown;
  b.alpha = cfg.alpha;
  b.lambda1 = cfg.lambda1;
  b.lambda2 = cfg.lambda2;

  DiffTensor classification =
      method_uses_logitnorm(method)
          ? logitnorm_loss(tape, z, g.labels, g.train_mask, cfg.tau)
          : nll_loss(tape, z, g.labels, g.train_mask);
  b.nll = classification.value()(0, 0);
  DiffTensor total = classification;

  const bool exposure_active = cfg.exposure && !mask_empty(g.expose_ood_mask);
  if (cfg.exposure && mask_empty(g.expose_ood_mask)) {
    throw DataError("exposure enabled but the dataset has an empty expose_ood mask");
  }

  if (method_uses_exposure(method)) {
    if (!exposure_active) {
      throw DataError("method '" + cfg.method + "' needs exposed OOD nodes (expose_ood mask)");
    }
    DiffTensor scores = tape.row_logsumexp(z);
    if (cfg.reg_on_propagated) {
      scores = propagate_on_tape(tape, scores, prop, cfg.eta, cfg.hops);
    }
    DiffTensor neg_e_in = tape.gather_rows(scores, mask_to_indices(g.train_mask));
    DiffTensor neg_e_out = tape.gather_rows(scores, mask_to_indices(g.expose_ood_mask));
    DiffTensor reg = hinge_reg(tape, neg_e_in, neg_e_out, cfg.m_in, cfg.m_out);
    b.reg = reg.value()(0, 0);
    total = tape.add(total, tape.scale(reg, cfg.alpha));
  }

  if (method_uses_ub(method) && cfg.lambda2 != 0.0 && epoch >= cfg.ub_start_epoch) {
    Mask id_set, ood_set;
    if (cfg.ub_over_all_nodes) {
      // transductive variant: every node that is not OOD-marked counts as ID
      id_set.assign(g.num_nodes, 0);
      for (int i = 0; i < g.num_nodes; ++i) {
        id_set[i] = (!g.test_ood_mask[i] && !g.expose_ood_mask[i]) ? 1 : 0;
      }
    } else {
      id_set = g.train_mask;
    }
    ood_set = exposure_active ? g.expose_ood_mask : Mask(g.num_nodes, 0);

    DiffTensor uniform = uniform_loss(tape, z, id_set, ood_set);
    Mask bound_set = cfg.ub_over_all_nodes ? Mask(g.num_nodes, 1) : mask_union(id_set, ood_set);
    DiffTensor bound = bound_loss(tape, z, bound_set);
    DiffTensor ub = tape.add(tape.scale(uniform, cfg.lambda1), tape.scale(bound, 1.0 - cfg.lambda1));
    b.uniform = uniform.value()(0, 0);
    b.bound = bound.value()(0, 0);
    b.ub = ub.value()(0, 0);
    total = tape.add(total, tape.scale(ub, cfg.lambda2));
  }

  b.total = total.value()(0, 0);
  result.node = total;
  return result;
}

Matrix bound_loss_grad(const Matrix& z, const Mask& node_set) {
  const std::vector<int> idx = mask_to_indices(node_set);
  const int k = static_cast<int>(idx.size());
  if (k == 0) throw NumericError("bound_loss_grad: empty node set");
  std::vector<double> norms(k);
  double mean = 0.0;
  for (int a = 0; a < k; ++a) {
    const double* row = z.row(idx[a]);
    double acc = 0.0;
    for (int j = 0; j < z.cols(); ++j) acc += row[j] * row[j];
    norms[a] = std::sqrt(acc);
    mean += norms[a];
  }
  mean /= k;
  Matrix grad(z.rows(), z.cols());
  if (mean == 0.0) return grad;
  for (int a = 0; a < k; ++a) {
    // d loss / d ||z_a||: own deviation plus the effect of z_a on the mean,
    // written out term by term.
    double outer = 2.0 * (norms[a] - mean) * (1.0 - 1.0 / k);
    for (int m = 0; m < k; ++m) {
      if (m == a) continue;
      outer += 2.0 * (norms[m] - mean) * (-1.0 / k);
    }
    outer /= (mean * k);
    if (norms[a] == 0.0) continue;
    const double* row = z.row(idx[a]);
    double* grow = grad.row(idx[a]);
    for (int j = 0; j < z.cols(); ++j) grow[j] = outer * row[j] / norms[a];
  }
  return grad;
}

Matrix uniform_loss_grad(const Matrix& z, const Mask& id_set, const Mask& ood_set) {
  Matrix grad(z.rows(), z.cols());
  auto add_group = [&](const Mask& set) {
    const std::vector<int> idx = mask_to_indices(set);
    const int k = static_cast<int>(idx.size());
    if (k == 0) return;
    std::vector<double> sums(k);
    double mean = 0.0;
    for (int a = 0; a < k; ++a) {
      const double* row = z.row(idx[a]);
      double acc = 0.0;
      for (int j = 0; j < z.cols(); ++j) acc += row[j];
      sums[a] = acc;
      mean += sums[a];
    }
    mean /= k;
    const double scale = std::max(std::abs(mean), kSumScaleFloor);
    for (int a = 0; a < k; ++a) {
      double outer = 2.0 * (sums[a] - mean) * (1.0 - 1.0 / k);
      for (int m = 0; m < k; ++m) {
        if (m == a) continue;
        outer += 2.0 * (sums[m] - mean) * (-1.0 / k);
      }
      outer /= (scale * k);
      double* grow = grad.row(idx[a]);
      // d sum(z_a) / d z_aj = 1 for every component
      for (int j = 0; j < z.cols(); ++j) grow[j] += outer;
    }
  };
  add_group(id_set);
  add_group(ood_set);
  return grad;
}

double cross_entropy_value(const Matrix& z, const std::vector<int>& labels, const Mask& mask) {
  double acc = 0.0;
  long count = 0;
  for (int i = 0; i < z.rows(); ++i) {
    if (!mask[i]) continue;
    const double* row = z.row(i);
    double m = row[0];
    for (int j = 1; j < z.cols(); ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < z.cols(); ++j) s += std::exp(row[j] - m);
    acc += m + std::log(s) - row[labels[i]];
    ++count;
  }
  if (count == 0) throw NumericError("cross_entropy_value: empty mask");
  return acc / static_cast<double>(count);
}

}  // namespace graphood
