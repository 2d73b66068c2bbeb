#include "vaesurv/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vaesurv::ad {

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                              " vs " + b.shape_str());
}

}  // namespace

double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax_row_inplace(const double* in, double* out, int n) {
  double m = in[0];
  for (int j = 1; j < n; ++j) m = std::max(m, in[j]);
  double s = 0.0;
  for (int j = 0; j < n; ++j) {
    out[j] = std::exp(in[j] - m);
    s += out[j];
  }
  for (int j = 0; j < n; ++j) out[j] /= s;
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(Matrix v) {
  Node n;
  n.value = std::move(v);
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  const Matrix &va = val(a), &vb = val(b);
  if (!va.same_shape(vb)) shape_error("add", va, vb);
  Node n{Matrix(va.rows, va.cols), {}, Op::add, a, b};
  for (int i = 0; i < va.size(); ++i) n.value.a[i] = va.a[i] + vb.a[i];
  return push(std::move(n));
}

int Tape::add_row(int a, int b) {
  const Matrix &va = val(a), &vb = val(b);
  if (vb.rows != 1 || vb.cols != va.cols) shape_error("add_row", va, vb);
  Node n{Matrix(va.rows, va.cols), {}, Op::add_row, a, b};
  for (int i = 0; i < va.rows; ++i)
    for (int j = 0; j < va.cols; ++j) n.value(i, j) = va(i, j) + vb(0, j);
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  const Matrix &va = val(a), &vb = val(b);
  if (!va.same_shape(vb)) shape_error("sub", va, vb);
  Node n{Matrix(va.rows, va.cols), {}, Op::sub, a, b};
  for (int i = 0; i < va.size(); ++i) n.value.a[i] = va.a[i] - vb.a[i];
  return push(std::move(n));
}

int Tape::mul(int a, int b) {
  const Matrix &va = val(a), &vb = val(b);
  if (!va.same_shape(vb)) shape_error("mul", va, vb);
  Node n{Matrix(va.rows, va.cols), {}, Op::mul, a, b};
  for (int i = 0; i < va.size(); ++i) n.value.a[i] = va.a[i] * vb.a[i];
  return push(std::move(n));
}

int Tape::div(int a, int b) {
  const Matrix &va = val(a), &vb = val(b);
  const bool colvec = vb.rows == va.rows && vb.cols == 1 && va.cols != 1;
  if (!va.same_shape(vb) && !colvec) shape_error("div", va, vb);
  Node n{Matrix(va.rows, va.cols), {}, Op::div, a, b};
  if (colvec) {
    for (int i = 0; i < va.rows; ++i)
      for (int j = 0; j < va.cols; ++j) n.value(i, j) = va(i, j) / vb(i, 0);
  } else {
    for (int i = 0; i < va.size(); ++i) n.value.a[i] = va.a[i] / vb.a[i];
  }
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  const Matrix &va = val(a), &vb = val(b);
  if (va.cols != vb.rows) shape_error("matmul", va, vb);
  Node n{Matrix::zeros(va.rows, vb.cols), {}, Op::matmul, a, b};
  const int m = va.rows, k = va.cols, p = vb.cols;
  for (int i = 0; i < m; ++i) {
    const double* ai = va.data() + static_cast<size_t>(i) * k;
    double* oi = n.value.data() + static_cast<size_t>(i) * p;
    for (int l = 0; l < k; ++l) {
      const double s = ai[l];
      const double* bl = vb.data() + static_cast<size_t>(l) * p;
      for (int j = 0; j < p; ++j) oi[j] += s * bl[j];
    }
  }
  return push(std::move(n));
}

int Tape::relu(int a) {
  const Matrix& va = val(a);
  Node n{Matrix(va.rows, va.cols), {}, Op::relu, a};
  for (int i = 0; i < va.size(); ++i) n.value.a[i] = va.a[i] > 0.0 ? va.a[i] : 0.0;
  return push(std::move(n));
}

int Tape::tanh(int a) {
  const Matrix& va = val(a);
  Node n{Matrix(va.rows, va.cols), {}, Op::tanh_fn, a};
  for (int i = 0; i < va.size(); ++i) n.value.a[i] = std::tanh(va.a[i]);
  return push(std::move(n));
}

int Tape::softplus(int a) {
  const Matrix& va = val(a);
  Node n{Matrix(va.rows, va.cols), {}, Op::softplus, a};
  for (int i = 0; i < va.size(); ++i) n.value.a[i] = stable_softplus(va.a[i]);
  return push(std::move(n));
}

int Tape::sigmoid(int a) {
  const Matrix& va = val(a);
  Node n{Matrix(va.rows, va.cols), {}, Op::sigmoid, a};
  for (int i = 0; i < va.size(); ++i) n.value.a[i] = stable_sigmoid(va.a[i]);
  return push(std::move(n));
}

int Tape::softmax_rows(int a) {
  const Matrix& va = val(a);
  Node n{Matrix(va.rows, va.cols), {}, Op::softmax_rows, a};
  for (int i = 0; i < va.rows; ++i)
    softmax_row_inplace(va.data() + static_cast<size_t>(i) * va.cols,
                        n.value.data() + static_cast<size_t>(i) * va.cols, va.cols);
  return push(std::move(n));
}

int Tape::log(int a) {
  const Matrix& va = val(a);
  Node n{Matrix(va.rows, va.cols), {}, Op::log_fn, a};
  for (int i = 0; i < va.size(); ++i) n.value.a[i] = std::log(va.a[i]);
  return push(std::move(n));
}

int Tape::exp(int a) {
  const Matrix& va = val(a);
  Node n{Matrix(va.rows, va.cols), {}, Op::exp_fn, a};
  for (int i = 0; i < va.size(); ++i) n.value.a[i] = std::exp(va.a[i]);
  return push(std::move(n));
}

int Tape::square(int a) {
  const Matrix& va = val(a);
  Node n{Matrix(va.rows, va.cols), {}, Op::square, a};
  for (int i = 0; i < va.size(); ++i) n.value.a[i] = va.a[i] * va.a[i];
  return push(std::move(n));
}

int Tape::affine(int a, double m, double b) {
  const Matrix& va = val(a);
  Node n{Matrix(va.rows, va.cols), {}, Op::affine, a, -1, m, b};
  for (int i = 0; i < va.size(); ++i) n.value.a[i] = m * va.a[i] + b;
  return push(std::move(n));
}

int Tape::clamp(int a, double lo, double hi) {
  const Matrix& va = val(a);
  Node n{Matrix(va.rows, va.cols), {}, Op::clamp, a, -1, lo, hi};
  for (int i = 0; i < va.size(); ++i) n.value.a[i] = std::min(std::max(va.a[i], lo), hi);
  return push(std::move(n));
}

int Tape::sum(int a) {
  const Matrix& va = val(a);
  Node n{Matrix(1, 1), {}, Op::sum_all, a};
  double s = 0.0;
  for (int i = 0; i < va.size(); ++i) s += va.a[i];
  n.value(0, 0) = s;
  return push(std::move(n));
}

int Tape::row_sum(int a) {
  const Matrix& va = val(a);
  Node n{Matrix(va.rows, 1), {}, Op::row_sum, a};
  for (int i = 0; i < va.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < va.cols; ++j) s += va(i, j);
    n.value(i, 0) = s;
  }
  return push(std::move(n));
}

int Tape::slice_cols(int a, int begin, int end) {
  const Matrix& va = val(a);
  if (begin < 0 || end > va.cols || begin >= end)
    throw std::invalid_argument("slice_cols: range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") out of " + va.shape_str());
  Node n{Matrix(va.rows, end - begin), {}, Op::slice_cols, a, -1, 0.0, 0.0, begin, end};
  for (int i = 0; i < va.rows; ++i)
    for (int j = begin; j < end; ++j) n.value(i, j - begin) = va(i, j);
  return push(std::move(n));
}

int Tape::dropout_mask(int a, Matrix mask) {
  if (!val(a).same_shape(mask)) shape_error("dropout_mask", val(a), mask);
  return mul(a, constant(std::move(mask)));
}

void Tape::backward(int root) {
  if (root < 0 || root >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("backward: node id out of range");
  const Matrix& rv = nodes_[root].value;
  if (rv.rows != 1 || rv.cols != 1)
    throw std::invalid_argument("backward: root must be scalar, got " + rv.shape_str());

  // Reset, then mark ancestors of the root. Everything else keeps grad zero.
  std::vector<char> reach(nodes_.size(), 0);
  reach[root] = 1;
  for (int u = root; u >= 0; --u) {
    Node& nd = nodes_[u];
    nd.grad = Matrix::zeros(nd.value.rows, nd.value.cols);
    if (!reach[u]) continue;
    if (nd.p0 >= 0) reach[nd.p0] = 1;
    if (nd.p1 >= 0) reach[nd.p1] = 1;
  }
  for (size_t u = root + 1; u < nodes_.size(); ++u)
    nodes_[u].grad = Matrix::zeros(nodes_[u].value.rows, nodes_[u].value.cols);

  nodes_[root].grad(0, 0) = 1.0;

  for (int u = root; u >= 0; --u) {
    if (!reach[u]) continue;
    const Node& nd = nodes_[u];
    const Matrix& g = nd.grad;
    switch (nd.op) {
      case Op::constant:
        break;
      case Op::add: {
        Matrix &ga = nodes_[nd.p0].grad, &gb = nodes_[nd.p1].grad;
        for (int i = 0; i < g.size(); ++i) {
          ga.a[i] += g.a[i];
          gb.a[i] += g.a[i];
        }
        break;
      }
      case Op::add_row: {
        Matrix &ga = nodes_[nd.p0].grad, &gb = nodes_[nd.p1].grad;
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) {
            ga(i, j) += g(i, j);
            gb(0, j) += g(i, j);
          }
        break;
      }
      case Op::sub: {
        Matrix &ga = nodes_[nd.p0].grad, &gb = nodes_[nd.p1].grad;
        for (int i = 0; i < g.size(); ++i) {
          ga.a[i] += g.a[i];
          gb.a[i] -= g.a[i];
        }
        break;
      }
      case Op::mul: {
        const Matrix &va = nodes_[nd.p0].value, &vb = nodes_[nd.p1].value;
        Matrix &ga = nodes_[nd.p0].grad, &gb = nodes_[nd.p1].grad;
        for (int i = 0; i < g.size(); ++i) {
          ga.a[i] += g.a[i] * vb.a[i];
          gb.a[i] += g.a[i] * va.a[i];
        }
        break;
      }
      case Op::div: {
        const Matrix &va = nodes_[nd.p0].value, &vb = nodes_[nd.p1].value;
        Matrix &ga = nodes_[nd.p0].grad, &gb = nodes_[nd.p1].grad;
        if (vb.cols == 1 && va.cols != 1) {
          for (int i = 0; i < g.rows; ++i) {
            const double bi = vb(i, 0);
            double acc = 0.0;
            for (int j = 0; j < g.cols; ++j) {
              ga(i, j) += g(i, j) / bi;
              acc += g(i, j) * va(i, j);
            }
            gb(i, 0) -= acc / (bi * bi);
          }
        } else {
          for (int i = 0; i < g.size(); ++i) {
            ga.a[i] += g.a[i] / vb.a[i];
            gb.a[i] -= g.a[i] * va.a[i] / (vb.a[i] * vb.a[i]);
          }
        }
        break;
      }
      case Op::matmul: {
        const Matrix &va = nodes_[nd.p0].value, &vb = nodes_[nd.p1].value;
        Matrix &ga = nodes_[nd.p0].grad, &gb = nodes_[nd.p1].grad;
        const int m = va.rows, k = va.cols, p = vb.cols;
        // ga += g * b^T ; gb += a^T * g
        for (int i = 0; i < m; ++i) {
          const double* gi = g.data() + static_cast<size_t>(i) * p;
          double* gai = ga.data() + static_cast<size_t>(i) * k;
          const double* ai = va.data() + static_cast<size_t>(i) * k;
          for (int l = 0; l < k; ++l) {
            const double* bl = vb.data() + static_cast<size_t>(l) * p;
            double acc = 0.0;
            for (int j = 0; j < p; ++j) acc += gi[j] * bl[j];
            gai[l] += acc;
            double* gbl = gb.data() + static_cast<size_t>(l) * p;
            const double s = ai[l];
            for (int j = 0; j < p; ++j) gbl[j] += s * gi[j];
          }
        }
        break;
      }
      case Op::relu: {
        const Matrix& va = nodes_[nd.p0].value;
        Matrix& ga = nodes_[nd.p0].grad;
        for (int i = 0; i < g.size(); ++i)
          if (va.a[i] > 0.0) ga.a[i] += g.a[i];
        break;
      }
      case Op::tanh_fn: {
        Matrix& ga = nodes_[nd.p0].grad;
        for (int i = 0; i < g.size(); ++i)
          ga.a[i] += g.a[i] * (1.0 - nd.value.a[i] * nd.value.a[i]);
        break;
      }
      case Op::softplus: {
        const Matrix& va = nodes_[nd.p0].value;
        Matrix& ga = nodes_[nd.p0].grad;
        for (int i = 0; i < g.size(); ++i) ga.a[i] += g.a[i] * stable_sigmoid(va.a[i]);
        break;
      }
      case Op::sigmoid: {
        Matrix& ga = nodes_[nd.p0].grad;
        for (int i = 0; i < g.size(); ++i)
          ga.a[i] += g.a[i] * nd.value.a[i] * (1.0 - nd.value.a[i]);
        break;
      }
      case Op::softmax_rows: {
        Matrix& ga = nodes_[nd.p0].grad;
        for (int i = 0; i < g.rows; ++i) {
          double dot = 0.0;
          for (int j = 0; j < g.cols; ++j) dot += g(i, j) * nd.value(i, j);
          for (int j = 0; j < g.cols; ++j)
            ga(i, j) += nd.value(i, j) * (g(i, j) - dot);
        }
        break;
      }
      case Op::log_fn: {
        const Matrix& va = nodes_[nd.p0].value;
        Matrix& ga = nodes_[nd.p0].grad;
        for (int i = 0; i < g.size(); ++i) ga.a[i] += g.a[i] / va.a[i];
        break;
      }
      case Op::exp_fn: {
        Matrix& ga = nodes_[nd.p0].grad;
        for (int i = 0; i < g.size(); ++i) ga.a[i] += g.a[i] * nd.value.a[i];
        break;
      }
      case Op::square: {
        const Matrix& va = nodes_[nd.p0].value;
        Matrix& ga = nodes_[nd.p0].grad;
        for (int i = 0; i < g.size(); ++i) ga.a[i] += 2.0 * g.a[i] * va.a[i];
        break;
      }
      case Op::affine: {
        Matrix& ga = nodes_[nd.p0].grad;
        for (int i = 0; i < g.size(); ++i) ga.a[i] += nd.c0 * g.a[i];
        break;
      }
      case Op::clamp: {
        const Matrix& va = nodes_[nd.p0].value;
        Matrix& ga = nodes_[nd.p0].grad;
        for (int i = 0; i < g.size(); ++i)
          if (va.a[i] >= nd.c0 && va.a[i] <= nd.c1) ga.a[i] += g.a[i];
        break;
      }
      case Op::sum_all: {
        Matrix& ga = nodes_[nd.p0].grad;
        const double s = g(0, 0);
        for (int i = 0; i < ga.size(); ++i) ga.a[i] += s;
        break;
      }
      case Op::row_sum: {
        Matrix& ga = nodes_[nd.p0].grad;
        for (int i = 0; i < ga.rows; ++i) {
          const double s = g(i, 0);
          for (int j = 0; j < ga.cols; ++j) ga(i, j) += s;
        }
        break;
      }
      case Op::slice_cols: {
        Matrix& ga = nodes_[nd.p0].grad;
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) ga(i, nd.i0 + j) += g(i, j);
        break;
      }
    }
  }
}

std::vector<double> finite_diff_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> point, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_gradient: step must be > 0");
  std::vector<double> grad(point.size());
  for (size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + step;
    const double fp = f(point);
    point[i] = saved - step;
    const double fm = f(point);
    point[i] = saved;
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

}  // namespace vaesurv::ad
