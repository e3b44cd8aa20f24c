#include "crowdlstm/lstm.hpp"

#include <cmath>

namespace crowdlstm {

namespace {

void check_shapes(ConstSpan x, const LstmState& s, const LstmWeights& w) {
  const std::size_t h = w.hidden_size();
  if (w.input_weights.cols() != 4 * h || w.recurrent_weights.cols() != 4 * h ||
      w.bias.rows() != 1 || w.bias.cols() != 4 * h) {
    throw DimensionError("lstm_cell: weights are not laid out as [i|f|g|o]");
  }
  if (x.size() != w.input_size()) {
    throw DimensionError("lstm_cell: input width " + std::to_string(x.size()) + ", expected " +
                         std::to_string(w.input_size()));
  }
  if (s.hidden.size() != h || s.cell.size() != h) {
    throw DimensionError("lstm_cell: state width mismatch");
  }
}

}  // namespace

LstmState lstm_cell(ConstSpan x, const LstmState& state, const LstmWeights& w, LstmCache* cache) {
  check_shapes(x, state, w);
  const std::size_t h = w.hidden_size();

  Vec z = linear_forward(x, w.input_weights, w.bias.values());
  const Vec zh = linear_forward(state.hidden, w.recurrent_weights, Vec(4 * h, 0.0));
  for (std::size_t k = 0; k < z.size(); ++k) z[k] += zh[k];

  LstmState next{Vec(h), Vec(h)};
  Vec gi(h), gf(h), gg(h), go(h), tc(h);
  for (std::size_t k = 0; k < h; ++k) {
    gi[k] = sigmoid(z[k]);
    gf[k] = sigmoid(z[h + k]);
    gg[k] = std::tanh(z[2 * h + k]);
    go[k] = sigmoid(z[3 * h + k]);
    next.cell[k] = gf[k] * state.cell[k] + gi[k] * gg[k];
    tc[k] = std::tanh(next.cell[k]);
    next.hidden[k] = go[k] * tc[k];
  }

  if (cache) {
    cache->input.assign(x.begin(), x.end());
    cache->hidden_prev = state.hidden;
    cache->cell_prev = state.cell;
    cache->gate_i = std::move(gi);
    cache->gate_f = std::move(gf);
    cache->gate_g = std::move(gg);
    cache->gate_o = std::move(go);
    cache->tanh_cell = std::move(tc);
  }
  return next;
}

void lstm_cell_backward(const LstmCache& cache, ConstSpan d_hidden, ConstSpan d_cell,
                        const LstmWeights& w, LstmGrads grads, MutSpan d_input,
                        MutSpan d_hidden_prev, MutSpan d_cell_prev) {
  const std::size_t h = w.hidden_size();
  if (d_hidden.size() != h || d_cell.size() != h || d_cell_prev.size() != h) {
    throw DimensionError("lstm_cell_backward: gradient width mismatch");
  }

  Vec dz(4 * h);
  for (std::size_t k = 0; k < h; ++k) {
    const double i = cache.gate_i[k];
    const double f = cache.gate_f[k];
    const double g = cache.gate_g[k];
    const double o = cache.gate_o[k];
    const double tc = cache.tanh_cell[k];

    const double d_o = d_hidden[k] * tc;
    const double dc = d_cell[k] + d_hidden[k] * o * (1.0 - tc * tc);
    const double d_i = dc * g;
    const double d_f = dc * cache.cell_prev[k];
    const double d_g = dc * i;
    d_cell_prev[k] += dc * f;

    dz[k] = d_i * i * (1.0 - i);
    dz[h + k] = d_f * f * (1.0 - f);
    dz[2 * h + k] = d_g * (1.0 - g * g);
    dz[3 * h + k] = d_o * o * (1.0 - o);
  }

  linear_backward(cache.input, w.input_weights, dz, grads.input_weights, grads.bias.values(),
                  d_input);
  // The bias gradient is already accumulated above.
  Vec unused_db(4 * h, 0.0);
  linear_backward(cache.hidden_prev, w.recurrent_weights, dz, grads.recurrent_weights, unused_db,
                  d_hidden_prev);
}

}  // namespace crowdlstm
