#include "vaesurv/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace vaesurv {

int MlpParams::param_count() const {
  return spec.input * spec.hidden + spec.hidden + spec.hidden * spec.output + spec.output;
}

void MlpParams::append_flat(std::vector<double>& out) const {
  out.insert(out.end(), w1.a.begin(), w1.a.end());
  out.insert(out.end(), b1.a.begin(), b1.a.end());
  out.insert(out.end(), w2.a.begin(), w2.a.end());
  out.insert(out.end(), b2.a.begin(), b2.a.end());
}

size_t MlpParams::read_flat(std::span<const double> flat, size_t offset) {
  for (Matrix* m : {&w1, &b1, &w2, &b2}) {
    if (offset + m->a.size() > flat.size())
      throw std::invalid_argument("MlpParams::read_flat: flat vector too short");
    std::copy(flat.begin() + offset, flat.begin() + offset + m->a.size(), m->a.begin());
    offset += m->a.size();
  }
  return offset;
}

void MlpParams::validate() const {
  if (spec.input < 1 || spec.hidden < 1 || spec.output < 1)
    throw std::invalid_argument("MlpParams: widths must be >= 1");
  if (w1.rows != spec.input || w1.cols != spec.hidden || b1.rows != 1 ||
      b1.cols != spec.hidden || w2.rows != spec.hidden || w2.cols != spec.output ||
      b2.rows != 1 || b2.cols != spec.output)
    throw std::invalid_argument("MlpParams: layer dimensions do not chain");
  for (const Matrix* m : {&w1, &b1, &w2, &b2})
    if (!all_finite(*m)) throw std::invalid_argument("MlpParams: non-finite entry");
}

MlpParams glorot_init(const LayerSpec& spec, std::mt19937_64& rng) {
  MlpParams p;
  p.spec = spec;
  p.w1 = Matrix(spec.input, spec.hidden);
  p.b1 = Matrix(1, spec.hidden);
  p.w2 = Matrix(spec.hidden, spec.output);
  p.b2 = Matrix(1, spec.output);
  const double lim1 = std::sqrt(6.0 / (spec.input + spec.hidden));
  const double lim2 = std::sqrt(6.0 / (spec.hidden + spec.output));
  std::uniform_real_distribution<double> u1(-lim1, lim1), u2(-lim2, lim2);
  for (double& w : p.w1.a) w = u1(rng);
  for (double& w : p.w2.a) w = u2(rng);
  p.validate();
  return p;
}

namespace {

int apply_activation(ad::Tape& tape, Activation act, int x) {
  switch (act) {
    case Activation::identity: return x;
    case Activation::relu: return tape.relu(x);
    case Activation::tanh: return tape.tanh(x);
  }
  throw std::logic_error("unknown activation");
}

}  // namespace

MlpNodes insert_mlp(ad::Tape& tape, const MlpParams& p) {
  return MlpNodes{tape.constant(p.w1), tape.constant(p.b1), tape.constant(p.w2),
                  tape.constant(p.b2)};
}

int mlp_apply(ad::Tape& tape, const MlpNodes& nodes, const LayerSpec& spec, int x,
              int mask) {
  if (tape.value(x).cols != spec.input)
    throw std::invalid_argument("mlp_apply: input width " +
                                tape.value(x).shape_str() + " does not match spec input " +
                                std::to_string(spec.input));
  int h = apply_activation(tape, spec.hidden_act,
                           tape.add_row(tape.matmul(x, nodes.w1), nodes.b1));
  if (mask >= 0) h = tape.mul(h, mask);
  return apply_activation(tape, spec.output_act,
                          tape.add_row(tape.matmul(h, nodes.w2), nodes.b2));
}

std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> x,
                                const Matrix* keep_mask) {
  if (static_cast<int>(x.size()) != p.spec.input)
    throw std::invalid_argument("mlp_forward: input width " + std::to_string(x.size()) +
                                " does not match spec input " +
                                std::to_string(p.spec.input));
  if (keep_mask && !(keep_mask->rows == 1 && keep_mask->cols == p.spec.hidden))
    throw std::invalid_argument("mlp_forward: keep-mask " + keep_mask->shape_str() +
                                " does not match hidden width 1x" +
                                std::to_string(p.spec.hidden));
  ad::Tape tape;
  const int xin = tape.constant(Matrix::from_row({x.begin(), x.end()}));
  MlpNodes nodes = insert_mlp(tape, p);
  int mask = -1;
  if (keep_mask) mask = tape.constant(*keep_mask);
  const int out = mlp_apply(tape, nodes, p.spec, xin, mask);
  return tape.value(out).a;
}

}  // namespace vaesurv
