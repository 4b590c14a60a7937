#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "procap/model/encoders.hpp"
#include "procap/model/model.hpp"

namespace procap::testing {

using model::EncoderTrace;
using model::Model;
using model::ModelConfig;

inline ModelConfig tiny_config(std::size_t vocab = 8) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.ingredient_size = 3;
  c.embed_dim = 4;
  c.encoder_hidden = 3;
  c.recipe_hidden = 6;
  c.decoder_hidden = 5;
  c.feature_dim = 4;
  return c;
}

// Uniform(-scale, scale) everywhere, biases included.
template <class T>
Model<T> random_model(std::uint64_t seed, double scale = 0.8, std::size_t vocab = 8) {
  Model<T> m(tiny_config(vocab));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    for (auto& v : m.params()[i].value) v = static_cast<T>(d(rng));
  }
  return m;
}

template <class T>
void zero_all(Model<T>& m) {
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    std::fill(m.params()[i].value.begin(), m.params()[i].value.end(), T(0));
  }
}

// Column-wise max of a row-major [steps x dim] dump.
inline std::vector<double> column_max(const EncoderTrace<double>& t) {
  std::vector<double> out(t.dim, -INFINITY);
  for (std::size_t s = 0; s < t.steps; ++s) {
    for (std::size_t d = 0; d < t.dim; ++d) out[d] = std::max(out[d], t.states[s * t.dim + d]);
  }
  return out;
}

inline corpus::FeatureMatrix random_frames(std::size_t rows, std::size_t cols, unsigned seed) {
  corpus::FeatureMatrix f(rows, cols);
  std::mt19937 rng(seed);
  std::normal_distribution<float> d(0, 1);
  for (auto& x : f.data) x = d(rng);
  return f;
}

// Straight-line LSTM step on plain vectors (gate order i, f, g, o).
struct PlainLstm {
  std::vector<double> wx, wh, b;
  std::size_t in, hid;

  void step(const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c) const {
    auto sig = [](double v) { return 1 / (1 + std::exp(-v)); };
    std::vector<double> z(4 * hid);
    for (std::size_t r = 0; r < 4 * hid; ++r) {
      double acc = b[r];
      for (std::size_t k = 0; k < in; ++k) acc += wx[r * in + k] * x[k];
      for (std::size_t k = 0; k < hid; ++k) acc += wh[r * hid + k] * h[k];
      z[r] = acc;
    }
    for (std::size_t k = 0; k < hid; ++k) {
      const double i = sig(z[k]), f = sig(z[hid + k]), g = std::tanh(z[2 * hid + k]),
                   o = sig(z[3 * hid + k]);
      c[k] = f * c[k] + i * g;
      h[k] = o * std::tanh(c[k]);
    }
  }
};

inline PlainLstm plain(const ad::LstmParams<double>& p) {
  return {p.w_x->value, p.w_h->value, p.b->value, p.input_dim, p.hidden_dim};
}

}  // namespace procap::testing
