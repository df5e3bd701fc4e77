#include "graphood/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "graphood/errors.hpp"

namespace graphood {

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw NumericError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
}

}  // namespace

int DiffTensor::rows() const { return value().rows(); }
int DiffTensor::cols() const { return value().cols(); }
const Matrix& DiffTensor::value() const { return tape_->value(id_); }
const Matrix& DiffTensor::adjoint() const { return tape_->adjoint(id_); }

DiffTensor Tape::emplace(Matrix value, std::function<void(Tape&)> backward) {
  Node node;
  node.adjoint = Matrix::zeros(value.rows(), value.cols());
  node.value = std::move(value);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return DiffTensor(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::check_same_tape(const DiffTensor& t) const {
  if (t.tape_ != this) throw NumericError("tensor belongs to a different tape");
}

DiffTensor Tape::leaf(Matrix value) { return emplace(std::move(value), nullptr); }

void Tape::backward(const DiffTensor& output) {
  check_same_tape(output);
  if (output.rows() != 1 || output.cols() != 1) {
    throw NumericError("backward: output must be a 1x1 scalar, got " +
                       output.value().shape_str());
  }
  for (Node& node : nodes_) node.adjoint.set_zero();
  nodes_[output.id_].adjoint(0, 0) = 1.0;
  for (int i = output.id_; i >= 0; --i) {
    if (nodes_[i].backward) nodes_[i].backward(*this);
  }
}

namespace {
// An op's closure needs the id of the node it produces, which is only known
// once emplace returns; the shared slot is filled in right after.
struct SelfId {
  int id = -1;
};
}  // namespace

DiffTensor Tape::matmul(const DiffTensor& a, const DiffTensor& b) {
  check_same_tape(a);
  check_same_tape(b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Matrix out(av.rows(), bv.cols());
  for (int i = 0; i < av.rows(); ++i) {
    const double* arow = av.row(i);
    double* orow = out.row(i);
    for (int k = 0; k < av.cols(); ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = bv.row(k);
      for (int j = 0; j < bv.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  auto self = std::make_shared<SelfId>();
  const int aid = a.id_, bid = b.id_;
  DiffTensor result = emplace(std::move(out), [self, aid, bid](Tape& t) {
    const Matrix& g = t.adjoint(self->id);
    const Matrix& av = t.value(aid);
    const Matrix& bv = t.value(bid);
    Matrix& ga = t.adjoint_mut(aid);
    Matrix& gb = t.adjoint_mut(bid);
    // dA = dC * B^T
    for (int i = 0; i < av.rows(); ++i) {
      const double* grow = g.row(i);
      double* garow = ga.row(i);
      for (int k = 0; k < av.cols(); ++k) {
        const double* brow = bv.row(k);
        double acc = 0.0;
        for (int j = 0; j < bv.cols(); ++j) acc += grow[j] * brow[j];
        garow[k] += acc;
      }
    }
    // dB = A^T * dC
    for (int i = 0; i < av.rows(); ++i) {
      const double* arow = av.row(i);
      const double* grow = g.row(i);
      for (int k = 0; k < av.cols(); ++k) {
        const double aik = arow[k];
        if (aik == 0.0) continue;
        double* gbrow = gb.row(k);
        for (int j = 0; j < bv.cols(); ++j) gbrow[j] += aik * grow[j];
      }
    }
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::spmm(const SparseMatrix& s, const DiffTensor& d) {
  check_same_tape(d);
  const Matrix& dv = d.value();
  if (s.n != dv.rows()) {
    throw NumericError("spmm: operator is " + std::to_string(s.n) + "x" + std::to_string(s.n) +
                       " but dense side is " + dv.shape_str());
  }
  Matrix out(s.n, dv.cols());
  for (int i = 0; i < s.n; ++i) {
    double* orow = out.row(i);
    for (int k = s.row_offsets[i]; k < s.row_offsets[i + 1]; ++k) {
      const double w = s.values[k];
      const double* drow = dv.row(s.col_indices[k]);
      for (int j = 0; j < dv.cols(); ++j) orow[j] += w * drow[j];
    }
  }
  auto self = std::make_shared<SelfId>();
  const int did = d.id_;
  const SparseMatrix* sp = &s;  // caller keeps the operator alive for the tape's lifetime
  DiffTensor result = emplace(std::move(out), [self, did, sp](Tape& t) {
    const Matrix& grad_out = t.adjoint(self->id);
    Matrix& grad_d = t.adjoint_mut(did);
    // dD = s^T * dC, realized as a scatter over s's rows.
    for (int i = 0; i < sp->n; ++i) {
      const double* grow = grad_out.row(i);
      for (int k = sp->row_offsets[i]; k < sp->row_offsets[i + 1]; ++k) {
        const double w = sp->values[k];
        double* drow = grad_d.row(sp->col_indices[k]);
        for (int j = 0; j < grad_out.cols(); ++j) drow[j] += w * grow[j];
      }
    }
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::add(const DiffTensor& a, const DiffTensor& b) {
  check_same_tape(a);
  check_same_tape(b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  enum class Mode { Same, Row, Scalar } mode;
  if (av.same_shape(bv)) {
    mode = Mode::Same;
  } else if (bv.rows() == 1 && bv.cols() == 1) {
    mode = Mode::Scalar;
  } else if (bv.rows() == 1 && bv.cols() == av.cols()) {
    mode = Mode::Row;
  } else {
    shape_error("add", av, bv);
  }
  Matrix out = av;
  if (mode == Mode::Same) {
    for (long i = 0; i < out.size(); ++i) out.data()[i] += bv.data()[i];
  } else if (mode == Mode::Scalar) {
    const double s = bv(0, 0);
    for (long i = 0; i < out.size(); ++i) out.data()[i] += s;
  } else {
    for (int i = 0; i < out.rows(); ++i) {
      double* orow = out.row(i);
      for (int j = 0; j < out.cols(); ++j) orow[j] += bv(0, j);
    }
  }
  auto self = std::make_shared<SelfId>();
  const int aid = a.id_, bid = b.id_;
  DiffTensor result = emplace(std::move(out), [self, aid, bid, mode](Tape& t) {
    const Matrix& g = t.adjoint(self->id);
    Matrix& ga = t.adjoint_mut(aid);
    Matrix& gb = t.adjoint_mut(bid);
    for (long i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i];
    if (mode == Mode::Same) {
      for (long i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i];
    } else if (mode == Mode::Scalar) {
      double total = 0.0;
      for (long i = 0; i < g.size(); ++i) total += g.data()[i];
      gb(0, 0) += total;
    } else {
      for (int i = 0; i < g.rows(); ++i) {
        const double* grow = g.row(i);
        for (int j = 0; j < g.cols(); ++j) gb(0, j) += grow[j];
      }
    }
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::sub(const DiffTensor& a, const DiffTensor& b) { return add(a, scale(b, -1.0)); }

DiffTensor Tape::mul(const DiffTensor& a, const DiffTensor& b) {
  check_same_tape(a);
  check_same_tape(b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (!av.same_shape(bv)) shape_error("mul", av, bv);
  Matrix out = av;
  for (long i = 0; i < out.size(); ++i) out.data()[i] *= bv.data()[i];
  auto self = std::make_shared<SelfId>();
  const int aid = a.id_, bid = b.id_;
  DiffTensor result = emplace(std::move(out), [self, aid, bid](Tape& t) {
    const Matrix& g = t.adjoint(self->id);
    const Matrix& av = t.value(aid);
    const Matrix& bv = t.value(bid);
    Matrix& ga = t.adjoint_mut(aid);
    Matrix& gb = t.adjoint_mut(bid);
    for (long i = 0; i < g.size(); ++i) {
      ga.data()[i] += g.data()[i] * bv.data()[i];
      gb.data()[i] += g.data()[i] * av.data()[i];
    }
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::div_scalar(const DiffTensor& a, const DiffTensor& b) {
  check_same_tape(a);
  check_same_tape(b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (bv.rows() != 1 || bv.cols() != 1) {
    throw NumericError("div_scalar: divisor must be 1x1, got " + bv.shape_str());
  }
  const double d = bv(0, 0);
  if (d == 0.0) throw NumericError("div_scalar: division by zero");
  Matrix out = av;
  for (long i = 0; i < out.size(); ++i) out.data()[i] /= d;
  auto self = std::make_shared<SelfId>();
  const int aid = a.id_, bid = b.id_;
  DiffTensor result = emplace(std::move(out), [self, aid, bid](Tape& t) {
    const Matrix& g = t.adjoint(self->id);
    const Matrix& av = t.value(aid);
    const double d = t.value(bid)(0, 0);
    Matrix& ga = t.adjoint_mut(aid);
    Matrix& gb = t.adjoint_mut(bid);
    double acc = 0.0;
    for (long i = 0; i < g.size(); ++i) {
      ga.data()[i] += g.data()[i] / d;
      acc += g.data()[i] * av.data()[i];
    }
    gb(0, 0) -= acc / (d * d);
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::scale(const DiffTensor& a, double c) {
  check_same_tape(a);
  Matrix out = a.value();
  for (long i = 0; i < out.size(); ++i) out.data()[i] *= c;
  auto self = std::make_shared<SelfId>();
  const int aid = a.id_;
  DiffTensor result = emplace(std::move(out), [self, aid, c](Tape& t) {
    const Matrix& g = t.adjoint(self->id);
    Matrix& ga = t.adjoint_mut(aid);
    for (long i = 0; i < g.size(); ++i) ga.data()[i] += c * g.data()[i];
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::add_const(const DiffTensor& a, double c) {
  check_same_tape(a);
  Matrix out = a.value();
  for (long i = 0; i < out.size(); ++i) out.data()[i] += c;
  auto self = std::make_shared<SelfId>();
  const int aid = a.id_;
  DiffTensor result = emplace(std::move(out), [self, aid](Tape& t) {
    const Matrix& g = t.adjoint(self->id);
    Matrix& ga = t.adjoint_mut(aid);
    for (long i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i];
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::relu(const DiffTensor& a) {
  check_same_tape(a);
  Matrix out = a.value();
  for (long i = 0; i < out.size(); ++i) out.data()[i] = std::max(0.0, out.data()[i]);
  auto self = std::make_shared<SelfId>();
  const int aid = a.id_;
  DiffTensor result = emplace(std::move(out), [self, aid](Tape& t) {
    const Matrix& g = t.adjoint(self->id);
    const Matrix& av = t.value(aid);
    Matrix& ga = t.adjoint_mut(aid);
    for (long i = 0; i < g.size(); ++i) {
      if (av.data()[i] > 0.0) ga.data()[i] += g.data()[i];
    }
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::reciprocal(const DiffTensor& a) {
  check_same_tape(a);
  Matrix out = a.value();
  for (long i = 0; i < out.size(); ++i) {
    if (out.data()[i] == 0.0) throw NumericError("reciprocal: division by zero");
    out.data()[i] = 1.0 / out.data()[i];
  }
  auto self = std::make_shared<SelfId>();
  const int aid = a.id_;
  DiffTensor result = emplace(std::move(out), [self, aid](Tape& t) {
    const Matrix& g = t.adjoint(self->id);
    const Matrix& av = t.value(aid);
    Matrix& ga = t.adjoint_mut(aid);
    for (long i = 0; i < g.size(); ++i) {
      const double x = av.data()[i];
      ga.data()[i] -= g.data()[i] / (x * x);
    }
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::abs_clamp(const DiffTensor& a, double floor) {
  check_same_tape(a);
  if (floor < 0.0) throw NumericError("abs_clamp: floor must be nonnegative");
  Matrix out = a.value();
  for (long i = 0; i < out.size(); ++i) out.data()[i] = std::max(std::abs(out.data()[i]), floor);
  auto self = std::make_shared<SelfId>();
  const int aid = a.id_;
  DiffTensor result = emplace(std::move(out), [self, aid, floor](Tape& t) {
    const Matrix& g = t.adjoint(self->id);
    const Matrix& av = t.value(aid);
    Matrix& ga = t.adjoint_mut(aid);
    for (long i = 0; i < g.size(); ++i) {
      const double x = av.data()[i];
      if (std::abs(x) > floor) ga.data()[i] += (x > 0.0 ? 1.0 : -1.0) * g.data()[i];
    }
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::rowwise_scale(const DiffTensor& a, const DiffTensor& s) {
  check_same_tape(a);
  check_same_tape(s);
  const Matrix& av = a.value();
  const Matrix& sv = s.value();
  if (sv.rows() != av.rows() || sv.cols() != 1) shape_error("rowwise_scale", av, sv);
  Matrix out = av;
  for (int i = 0; i < out.rows(); ++i) {
    const double f = sv(i, 0);
    double* orow = out.row(i);
    for (int j = 0; j < out.cols(); ++j) orow[j] *= f;
  }
  auto self = std::make_shared<SelfId>();
  const int aid = a.id_, sid = s.id_;
  DiffTensor result = emplace(std::move(out), [self, aid, sid](Tape& t) {
    const Matrix& g = t.adjoint(self->id);
    const Matrix& av = t.value(aid);
    const Matrix& sv = t.value(sid);
    Matrix& ga = t.adjoint_mut(aid);
    Matrix& gs = t.adjoint_mut(sid);
    for (int i = 0; i < g.rows(); ++i) {
      const double f = sv(i, 0);
      const double* grow = g.row(i);
      const double* arow = av.row(i);
      double* garow = ga.row(i);
      double dot = 0.0;
      for (int j = 0; j < g.cols(); ++j) {
        garow[j] += f * grow[j];
        dot += grow[j] * arow[j];
      }
      gs(i, 0) += dot;
    }
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::gather_rows(const DiffTensor& a, const std::vector<int>& indices) {
  check_same_tape(a);
  const Matrix& av = a.value();
  Matrix out(static_cast<int>(indices.size()), av.cols());
  for (size_t i = 0; i < indices.size(); ++i) {
    const int r = indices[i];
    if (r < 0 || r >= av.rows()) {
      throw NumericError("gather_rows: index " + std::to_string(r) + " outside " +
                         av.shape_str());
    }
    std::copy(av.row(r), av.row(r) + av.cols(), out.row(static_cast<int>(i)));
  }
  auto self = std::make_shared<SelfId>();
  const int aid = a.id_;
  const std::vector<int> idx = indices;
  DiffTensor result = emplace(std::move(out), [self, aid, idx](Tape& t) {
    const Matrix& g = t.adjoint(self->id);
    Matrix& ga = t.adjoint_mut(aid);
    for (size_t i = 0; i < idx.size(); ++i) {
      const double* grow = g.row(static_cast<int>(i));
      double* garow = ga.row(idx[i]);
      for (int j = 0; j < g.cols(); ++j) garow[j] += grow[j];
    }
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::row_logsumexp(const DiffTensor& z) {
  check_same_tape(z);
  const Matrix& zv = z.value();
  if (zv.cols() < 1) throw NumericError("row_logsumexp: need at least one column");
  if (!zv.all_finite()) throw NumericError("row_logsumexp: non-finite input");
  Matrix out(zv.rows(), 1);
  for (int i = 0; i < zv.rows(); ++i) {
    const double* row = zv.row(i);
    double m = row[0];
    for (int j = 1; j < zv.cols(); ++j) m = std::max(m, row[j]);
    double acc = 0.0;
    for (int j = 0; j < zv.cols(); ++j) acc += std::exp(row[j] - m);
    out(i, 0) = m + std::log(acc);
  }
  auto self = std::make_shared<SelfId>();
  const int zid = z.id_;
  DiffTensor result = emplace(std::move(out), [self, zid](Tape& t) {
    const Matrix& g = t.adjoint(self->id);
    const Matrix& zv = t.value(zid);
    const Matrix& lse = t.value(self->id);
    Matrix& gz = t.adjoint_mut(zid);
    for (int i = 0; i < zv.rows(); ++i) {
      const double gi = g(i, 0);
      if (gi == 0.0) continue;
      const double* zrow = zv.row(i);
      double* grow = gz.row(i);
      for (int j = 0; j < zv.cols(); ++j) grow[j] += gi * std::exp(zrow[j] - lse(i, 0));
    }
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::row_norm2(const DiffTensor& z) {
  check_same_tape(z);
  const Matrix& zv = z.value();
  Matrix out(zv.rows(), 1);
  for (int i = 0; i < zv.rows(); ++i) {
    const double* row = zv.row(i);
    double acc = 0.0;
    for (int j = 0; j < zv.cols(); ++j) acc += row[j] * row[j];
    out(i, 0) = std::sqrt(acc);
  }
  auto self = std::make_shared<SelfId>();
  const int zid = z.id_;
  DiffTensor result = emplace(std::move(out), [self, zid](Tape& t) {
    const Matrix& g = t.adjoint(self->id);
    const Matrix& zv = t.value(zid);
    const Matrix& norms = t.value(self->id);
    Matrix& gz = t.adjoint_mut(zid);
    for (int i = 0; i < zv.rows(); ++i) {
      const double n = norms(i, 0);
      if (n == 0.0) continue;  // subgradient 0 at the origin
      const double f = g(i, 0) / n;
      const double* zrow = zv.row(i);
      double* grow = gz.row(i);
      for (int j = 0; j < zv.cols(); ++j) grow[j] += f * zrow[j];
    }
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::row_sum(const DiffTensor& z) {
  check_same_tape(z);
  const Matrix& zv = z.value();
  Matrix out(zv.rows(), 1);
  for (int i = 0; i < zv.rows(); ++i) {
    const double* row = zv.row(i);
    double acc = 0.0;
    for (int j = 0; j < zv.cols(); ++j) acc += row[j];
    out(i, 0) = acc;
  }
  auto self = std::make_shared<SelfId>();
  const int zid = z.id_;
  DiffTensor result = emplace(std::move(out), [self, zid](Tape& t) {
    const Matrix& g = t.adjoint(self->id);
    Matrix& gz = t.adjoint_mut(zid);
    for (int i = 0; i < gz.rows(); ++i) {
      const double gi = g(i, 0);
      double* grow = gz.row(i);
      for (int j = 0; j < gz.cols(); ++j) grow[j] += gi;
    }
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::masked_mean(const DiffTensor& x, const std::vector<std::uint8_t>& mask) {
  check_same_tape(x);
  const Matrix& xv = x.value();
  if (xv.cols() != 1) throw NumericError("masked_mean: input must be n x 1, got " + xv.shape_str());
  if (static_cast<int>(mask.size()) != xv.rows()) {
    throw NumericError("masked_mean: mask size " + std::to_string(mask.size()) +
                       " vs rows " + std::to_string(xv.rows()));
  }
  long count = 0;
  double acc = 0.0;
  for (int i = 0; i < xv.rows(); ++i) {
    if (mask[i]) {
      acc += xv(i, 0);
      ++count;
    }
  }
  if (count == 0) throw NumericError("masked_mean: empty mask");
  Matrix out(1, 1);
  out(0, 0) = acc / static_cast<double>(count);
  auto self = std::make_shared<SelfId>();
  const int xid = x.id_;
  const std::vector<std::uint8_t> m = mask;
  DiffTensor result = emplace(std::move(out), [self, xid, m, count](Tape& t) {
    const double g = t.adjoint(self->id)(0, 0) / static_cast<double>(count);
    Matrix& gx = t.adjoint_mut(xid);
    for (int i = 0; i < gx.rows(); ++i) {
      if (m[i]) gx(i, 0) += g;
    }
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::softmax_cross_entropy(const DiffTensor& z, const std::vector<int>& labels,
                                       const std::vector<std::uint8_t>& mask) {
  check_same_tape(z);
  const Matrix& zv = z.value();
  const int n = zv.rows(), c = zv.cols();
  if (static_cast<int>(labels.size()) != n || static_cast<int>(mask.size()) != n) {
    throw NumericError("softmax_cross_entropy: labels/mask size mismatch");
  }
  if (!zv.all_finite()) throw NumericError("softmax_cross_entropy: non-finite logits");
  long count = 0;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    if (labels[i] < 0 || labels[i] >= c) {
      throw NumericError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                         " outside [0," + std::to_string(c) + ") at row " + std::to_string(i));
    }
    const double* row = zv.row(i);
    double m = row[0];
    for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += std::exp(row[j] - m);
    acc += m + std::log(s) - row[labels[i]];
    ++count;
  }
  if (count == 0) throw NumericError("softmax_cross_entropy: empty mask");
  Matrix out(1, 1);
  out(0, 0) = acc / static_cast<double>(count);
  auto self = std::make_shared<SelfId>();
  const int zid = z.id_;
  const std::vector<int> lab = labels;
  const std::vector<std::uint8_t> msk = mask;
  DiffTensor result = emplace(std::move(out), [self, zid, lab, msk, count](Tape& t) {
    const double g = t.adjoint(self->id)(0, 0) / static_cast<double>(count);
    const Matrix& zv = t.value(zid);
    Matrix& gz = t.adjoint_mut(zid);
    const int c = zv.cols();
    for (int i = 0; i < zv.rows(); ++i) {
      if (!msk[i]) continue;
      const double* row = zv.row(i);
      double m = row[0];
      for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
      double s = 0.0;
      for (int j = 0; j < c; ++j) s += std::exp(row[j] - m);
      double* grow = gz.row(i);
      for (int j = 0; j < c; ++j) grow[j] += g * std::exp(row[j] - m) / s;
      grow[lab[i]] -= g;
    }
  });
  self->id = result.id_;
  return result;
}

DiffTensor Tape::stop_gradient(const DiffTensor& a) {
  check_same_tape(a);
  return emplace(a.value(), nullptr);
}

Matrix row_softmax(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (int i = 0; i < z.rows(); ++i) {
    const double* row = z.row(i);
    double m = row[0];
    for (int j = 1; j < z.cols(); ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < z.cols(); ++j) s += std::exp(row[j] - m);
    double* prow = p.row(i);
    for (int j = 0; j < z.cols(); ++j) prow[j] = std::exp(row[j] - m) / s;
  }
  return p;
}

}  // namespace graphood
