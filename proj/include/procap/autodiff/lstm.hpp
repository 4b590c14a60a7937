#pragma once

#include <string>

#include "procap/autodiff/tensor.hpp"

namespace procap::ad {

// Parameters of one LSTM layer. Gate blocks are stacked in the order
// input, forget, cell candidate, output along the rows of w_x, w_h and b.
template <class T>
struct LstmParams {
  Parameter<T>* w_x = nullptr;  // [4H x I]
  Parameter<T>* w_h = nullptr;  // [4H x H]
  Parameter<T>* b = nullptr;    // [4H]
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  static LstmParams create(ParameterSet<T>& set, const std::string& prefix, std::size_t input_dim,
                           std::size_t hidden_dim) {
    LstmParams p;
    p.w_x = &set.add(prefix + ".w_x", {4 * hidden_dim, input_dim});
    p.w_h = &set.add(prefix + ".w_h", {4 * hidden_dim, hidden_dim});
    p.b = &set.add(prefix + ".b", {4 * hidden_dim});
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    return p;
  }

  static LstmParams bind(ParameterSet<T>& set, const std::string& prefix) {
    LstmParams p;
    p.w_x = &set.get(prefix + ".w_x");
    p.w_h = &set.get(prefix + ".w_h");
    p.b = &set.get(prefix + ".b");
    p.hidden_dim = p.w_h->shape[1];
    p.input_dim = p.w_x->shape[1];
    return p;
  }

  void set_frozen(bool frozen) const {
    w_x->frozen = frozen;
    w_h->frozen = frozen;
    b->frozen = frozen;
  }
};

template <class T>
struct LstmState {
  Tensor<T> h;
  Tensor<T> c;
};

template <class T>
LstmState<T> lstm_zero_state(Graph<T>& g, std::size_t hidden_dim) {
  return {g.zeros({hidden_dim}), g.zeros({hidden_dim})};
}

// One step of the standard LSTM recurrence:
//   i, f, o = sigmoid(.), g = tanh(.), c = f*c_prev + i*g, h = o*tanh(c).
template <class T>
LstmState<T> lstm_cell(const Tensor<T>& x, const LstmState<T>& prev, const LstmParams<T>& p) {
  const std::size_t hd = p.hidden_dim;
  if (x.shape() != Shape{p.input_dim}) {
    throw ShapeError("lstm_cell: input " + shape_str(x.shape()) + " but cell expects [" +
                     std::to_string(p.input_dim) + "]");
  }
  if (prev.h.shape() != Shape{hd} || prev.c.shape() != Shape{hd}) {
    throw ShapeError("lstm_cell: state " + shape_str(prev.h.shape()) + "/" +
                     shape_str(prev.c.shape()) + " but hidden dim is " + std::to_string(hd));
  }
  Graph<T>& g = *x.graph();
  auto pre = add(add(matmul(g.param(*p.w_x), x), matmul(g.param(*p.w_h), prev.h)), g.param(*p.b));
  auto in_gate = sigmoid(slice(pre, 0, hd));
  auto forget_gate = sigmoid(slice(pre, hd, hd));
  auto candidate = tanh(slice(pre, 2 * hd, hd));
  auto out_gate = sigmoid(slice(pre, 3 * hd, hd));
  auto c = add(mul(forget_gate, prev.c), mul(in_gate, candidate));
  auto h = mul(out_gate, tanh(c));
  return {h, c};
}

}  // namespace procap::ad
