#pragma once

#include <random>
#include <span>
#include <vector>

#include "vaesurv/autodiff.hpp"
#include "vaesurv/matrix.hpp"

namespace vaesurv {

enum class Activation { identity, relu, tanh };

// One hidden layer plus an output layer; all the networks here have this
// shape. Weights are stored (in x out) so a batch forward is x * W + b.
struct LayerSpec {
  int input = 0;
  int hidden = 0;
  int output = 0;
  Activation hidden_act = Activation::relu;
  Activation output_act = Activation::identity;
};

struct MlpParams {
  LayerSpec spec;
  Matrix w1, b1;  // (in x hidden), (1 x hidden)
  Matrix w2, b2;  // (hidden x out), (1 x out)

  int param_count() const;
  void append_flat(std::vector<double>& out) const;
  // Reads param_count() values starting at `offset`; returns the new offset.
  size_t read_flat(std::span<const double> flat, size_t offset);
  void validate() const;  // dimension chaining + finiteness
};

// Uniform init in +-sqrt(6 / (fan_in + fan_out)) per layer, biases zero.
MlpParams glorot_init(const LayerSpec& spec, std::mt19937_64& rng);

// Tape-side forward. `mask`, if >= 0, multiplies the hidden activations
// (entries pre-scaled for inverted dropout).
struct MlpNodes {
  int w1, b1, w2, b2;
};
MlpNodes insert_mlp(ad::Tape& tape, const MlpParams& p);
int mlp_apply(ad::Tape& tape, const MlpNodes& nodes, const LayerSpec& spec, int x,
              int mask = -1);

// Plain forward for a single input vector. A keep-mask, when given, must
// match the hidden width and already carry the 1/keep_prob scale; with no
// mask the forward is the inference path (inverted dropout needs no
// rescaling there).
std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> x,
                                const Matrix* keep_mask = nullptr);

}  // namespace vaesurv
