#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "graphood/matrix.hpp"

namespace graphood {

class Tape;

// Handle to a node on a Tape. Node values are immutable once created;
// adjoints are filled in by Tape::backward.
class DiffTensor {
 public:
  DiffTensor() = default;

  int rows() const;
  int cols() const;
  const Matrix& value() const;
  const Matrix& adjoint() const;
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  DiffTensor(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Tape-style computation record: every operation appends a node holding the
// result value and a pull-back closure. backward() zeroes all adjoints,
// seeds the (scalar) output with 1 and sweeps the record once in reverse,
// so after it returns the adjoint of any leaf is d(output)/d(leaf).
//
// A Tape is confined to one flow of control and must outlive its handles.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf node; gradient is accumulated into its adjoint. Constant inputs are
  // just leaves whose adjoints the caller ignores.
  DiffTensor leaf(Matrix value);

  void backward(const DiffTensor& output);

  DiffTensor matmul(const DiffTensor& a, const DiffTensor& b);
  // s is a constant operator; only the dense side receives a gradient.
  DiffTensor spmm(const SparseMatrix& s, const DiffTensor& d);

  // add supports same-shape, row-vector (1 x k) and scalar (1 x 1) broadcast
  // on the right operand; anything else is a hard error.
  DiffTensor add(const DiffTensor& a, const DiffTensor& b);
  DiffTensor sub(const DiffTensor& a, const DiffTensor& b);
  DiffTensor mul(const DiffTensor& a, const DiffTensor& b);  // elementwise, same shape
  DiffTensor div_scalar(const DiffTensor& a, const DiffTensor& b);  // b is 1 x 1
  DiffTensor scale(const DiffTensor& a, double c);
  DiffTensor add_const(const DiffTensor& a, double c);
  DiffTensor relu(const DiffTensor& a);
  DiffTensor reciprocal(const DiffTensor& a);
  // max(|x|, floor) elementwise; derivative is sign(x) outside the clamp
  // region and 0 inside.
  DiffTensor abs_clamp(const DiffTensor& a, double floor);
  // Multiplies row v of a by s(v, 0); s must be rows(a) x 1.
  DiffTensor rowwise_scale(const DiffTensor& a, const DiffTensor& s);
  DiffTensor gather_rows(const DiffTensor& a, const std::vector<int>& indices);

  // out(v, 0) = log sum_c exp(z(v, c)), max-subtraction stabilized.
  // Non-finite inputs are a hard error.
  DiffTensor row_logsumexp(const DiffTensor& z);
  DiffTensor row_norm2(const DiffTensor& z);  // Euclidean norm of each row
  DiffTensor row_sum(const DiffTensor& z);
  // x must be n x 1; mean over rows with mask set. Empty mask is an error.
  DiffTensor masked_mean(const DiffTensor& x, const std::vector<std::uint8_t>& mask);
  // Mean over masked rows of (logsumexp(z_v) - z(v, label_v)).
  DiffTensor softmax_cross_entropy(const DiffTensor& z, const std::vector<int>& labels,
                                   const std::vector<std::uint8_t>& mask);
  // Passes the value through and blocks the adjoint.
  DiffTensor stop_gradient(const DiffTensor& a);

  const Matrix& value(int id) const { return nodes_[id].value; }
  const Matrix& adjoint(int id) const { return nodes_[id].adjoint; }
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Matrix value;
    Matrix adjoint;
    std::function<void(Tape&)> backward;  // empty for leaves
  };

  DiffTensor emplace(Matrix value, std::function<void(Tape&)> backward);
  Matrix& adjoint_mut(int id) { return nodes_[id].adjoint; }
  void check_same_tape(const DiffTensor& t) const;

  // deque keeps value()/adjoint() references stable while ops are appended
  std::deque<Node> nodes_;
};

// Numerically stable row softmax of a plain matrix (no tape involved).
Matrix row_softmax(const Matrix& z);

}  // namespace graphood
