#pragma once

#include "crowdlstm/tensor.hpp"

namespace crowdlstm {

struct LstmState {
  Vec hidden;
  Vec cell;

  static LstmState zeros(std::size_t hidden_size) {
    return {Vec(hidden_size, 0.0), Vec(hidden_size, 0.0)};
  }
};

// Gate pre-activations are laid out as [i | f | g | o], each of width H:
// input_weights is n x 4H, recurrent_weights is H x 4H, bias is 1 x 4H.
struct LstmWeights {
  const Matrix& input_weights;
  const Matrix& recurrent_weights;
  const Matrix& bias;

  std::size_t input_size() const { return input_weights.rows(); }
  std::size_t hidden_size() const { return recurrent_weights.rows(); }
};

struct LstmGrads {
  Matrix& input_weights;
  Matrix& recurrent_weights;
  Matrix& bias;
};

// Everything the backward pass needs from one forward step.
struct LstmCache {
  Vec input;
  Vec hidden_prev;
  Vec cell_prev;
  Vec gate_i;
  Vec gate_f;
  Vec gate_g;
  Vec gate_o;
  Vec tanh_cell;
};

// c' = f * c + i * g, h' = o * tanh(c').
LstmState lstm_cell(ConstSpan x, const LstmState& state, const LstmWeights& w,
                    LstmCache* cache = nullptr);

// Given dL/dh' and dL/dc', accumulates parameter gradients and writes
// dL/dx, dL/dh, dL/dc (added into the provided buffers).
void lstm_cell_backward(const LstmCache& cache, ConstSpan d_hidden, ConstSpan d_cell,
                        const LstmWeights& w, LstmGrads grads, MutSpan d_input,
                        MutSpan d_hidden_prev, MutSpan d_cell_prev);

}  // namespace crowdlstm
