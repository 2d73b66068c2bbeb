#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "vaesurv/matrix.hpp"

namespace vaesurv::ad {

// Reverse-mode differentiation on a tape of matrix-valued nodes.
//
// Nodes are appended in topological order (operands before results), so the
// backward sweep is a single reverse pass over the tape. A tape is owned by
// one thread; independent tapes may run concurrently.

enum class Op : uint8_t {
  constant,
  add,        // same shape
  add_row,    // (r x c) + (1 x c), bias broadcast
  sub,        // same shape
  mul,        // elementwise, same shape
  div,        // elementwise; rhs may be (r x 1), dividing every row entry
  matmul,     // (m x k) * (k x n)
  relu,
  tanh_fn,
  softplus,
  sigmoid,
  softmax_rows,  // row-wise softmax with max shift
  log_fn,
  exp_fn,
  square,
  affine,      // m * x + b, scalar m and b
  clamp,       // clip to [lo, hi]; pass-through gradient inside the range
  sum_all,     // (r x c) -> (1 x 1)
  row_sum,     // (r x c) -> (r x 1)
  slice_cols,  // columns [i0, i1)
};

struct Node {
  Matrix value;
  Matrix grad;
  Op op = Op::constant;
  int p0 = -1;
  int p1 = -1;
  double c0 = 0.0;  // affine m / clamp lo
  double c1 = 0.0;  // affine b / clamp hi
  int i0 = 0;       // slice begin
  int i1 = 0;       // slice end
};

class Tape {
 public:
  // Leaf node holding an externally supplied value (input, parameter, mask).
  int constant(Matrix v);

  int add(int a, int b);
  int add_row(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int div(int a, int b);
  int matmul(int a, int b);
  int relu(int a);
  int tanh(int a);
  int softplus(int a);
  int sigmoid(int a);
  int softmax_rows(int a);
  int log(int a);
  int exp(int a);
  int square(int a);
  int affine(int a, double m, double b);
  int clamp(int a, double lo, double hi);
  int sum(int a);
  int row_sum(int a);
  int slice_cols(int a, int begin, int end);

  // Multiplies by a caller-supplied mask matrix. Mask entries already carry
  // the inverted-dropout scale (0 or 1/keep_prob), so an all-ones mask is a
  // bitwise no-op.
  int dropout_mask(int a, Matrix mask);

  // Propagates d(root)/d(node) into every node reachable from `root`, which
  // must be 1x1. Gradients are reset first, then accumulated within the
  // call; unreachable nodes keep gradient zero.
  void backward(int root);

  const Matrix& value(int id) const { return nodes_[id].value; }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;

  int push(Node n);
  const Matrix& val(int id) const { return nodes_[id].value; }
};

// Numerically stable scalar kernels shared by the tape ops and the
// closed-form likelihood code, so both paths produce identical values.
double stable_softplus(double x);
double stable_sigmoid(double x);
void softmax_row_inplace(const double* in, double* out, int n);

// Central finite differences, (f(p + h e_i) - f(p - h e_i)) / 2h.
std::vector<double> finite_diff_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> point, double step);

}  // namespace vaesurv::ad
