#pragma once

#include <span>
#include <vector>

#include "procap/autodiff/lstm.hpp"
#include "procap/autodiff/tensor.hpp"
#include "procap/corpus/features.hpp"
#include "procap/corpus/recipe.hpp"
#include "procap/corpus/vocabulary.hpp"
#include "procap/model/model.hpp"

namespace procap::model {

enum class Source { kText, kVideo, kFused, kPredicted, kIngredientInit };

// A step representation of dimension ModelConfig::step_dim(), regardless of
// where it came from.
template <class T>
struct StepRepr {
  ad::Tensor<T> vector;
  Source source = Source::kText;
};

// Per-timestep concatenated bi-LSTM states [T x D] before pooling, plus the
// frame indices a video encoding consumed.
template <class T>
struct EncoderTrace {
  std::size_t steps = 0;
  std::size_t dim = 0;
  std::vector<T> states;
  std::vector<std::size_t> frames;

  corpus::FeatureMatrix as_features() const {
    corpus::FeatureMatrix m(steps, dim);
    for (std::size_t i = 0; i < states.size(); ++i) m.data[i] = static_cast<float>(states[i]);
    return m;
  }
};

namespace detail {

// Runs forward and backward LSTMs over `inputs`, concatenates the two hidden
// states per timestep and max-pools each dimension over time.
template <class T>
ad::Tensor<T> bilstm_max_pool(const std::vector<ad::Tensor<T>>& inputs, const ad::LstmParams<T>& fwd,
                              const ad::LstmParams<T>& bwd, EncoderTrace<T>* trace) {
  ad::Graph<T>& g = *inputs.front().graph();
  const std::size_t steps = inputs.size();
  std::vector<ad::Tensor<T>> fwd_h(steps), bwd_h(steps);
  auto state = ad::lstm_zero_state(g, fwd.hidden_dim);
  for (std::size_t t = 0; t < steps; ++t) {
    state = ad::lstm_cell(inputs[t], state, fwd);
    fwd_h[t] = state.h;
  }
  state = ad::lstm_zero_state(g, bwd.hidden_dim);
  for (std::size_t t = steps; t-- > 0;) {
    state = ad::lstm_cell(inputs[t], state, bwd);
    bwd_h[t] = state.h;
  }
  std::vector<ad::Tensor<T>> rows;
  rows.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) rows.push_back(ad::concat<T>({fwd_h[t], bwd_h[t]}));
  auto stacked = ad::stack_rows(rows);
  if (trace != nullptr) {
    trace->steps = steps;
    trace->dim = stacked.shape()[1];
    trace->states = stacked.value();
  }
  return ad::max_over_time(stacked);
}

}  // namespace detail

// Sentence encoder: embeddings -> bi-LSTM -> temporal max-pool.
template <class T>
StepRepr<T> encode_sentence(ad::Graph<T>& g, const Model<T>& m, std::span<const corpus::TokenId> tokens,
                            EncoderTrace<T>* trace = nullptr) {
  if (tokens.empty()) throw ShapeError("encode_sentence: empty token list");
  auto table = g.param(m.embedding());
  std::vector<ad::Tensor<T>> inputs;
  inputs.reserve(tokens.size());
  for (corpus::TokenId id : tokens) {
    inputs.push_back(ad::embedding_lookup(table, static_cast<std::size_t>(id)));
  }
  return {detail::bilstm_max_pool(inputs, m.se_fwd(), m.se_bwd(), trace), Source::kText};
}

// Frame indices (absolute) consumed for a segment: start, start+stride, ...
// An empty result falls back to the middle frame.
inline std::vector<std::size_t> sample_frames(const corpus::Segment& seg, std::size_t stride) {
  if (seg.end <= seg.start) throw ShapeError("encode_video_segment: zero-length segment");
  std::vector<std::size_t> idx;
  for (std::size_t f = seg.start; f < seg.end; f += stride) idx.push_back(f);
  if (idx.empty()) idx.push_back(seg.start + seg.length() / 2);
  return idx;
}

// Video encoder over the strided frames of one segment; same pooling as the
// sentence encoder so the result can stand in for a text encoding.
template <class T>
StepRepr<T> encode_video_segment(ad::Graph<T>& g, const Model<T>& m, const corpus::FeatureMatrix& frames,
                                 const corpus::Segment& seg, std::size_t stride,
                                 EncoderTrace<T>* trace = nullptr) {
  if (frames.cols != m.config().feature_dim) {
    throw ShapeError("encode_video_segment: features have dim " + std::to_string(frames.cols) +
                     ", encoder expects " + std::to_string(m.config().feature_dim));
  }
  if (seg.end > frames.rows) throw ShapeError("encode_video_segment: segment exceeds video");
  const auto idx = sample_frames(seg, stride);
  std::vector<ad::Tensor<T>> inputs;
  inputs.reserve(idx.size());
  for (std::size_t f : idx) {
    auto row = frames.row(f);
    inputs.push_back(g.constant({frames.cols}, std::vector<T>(row.begin(), row.end())));
  }
  auto pooled = detail::bilstm_max_pool(inputs, m.ve_fwd(), m.ve_bwd(), trace);
  if (trace != nullptr) trace->frames = idx;
  return {pooled, Source::kVideo};
}

// Linear map of the concatenated text and video encodings back to step_dim.
template <class T>
StepRepr<T> fuse(const StepRepr<T>& text, const StepRepr<T>& video, const Model<T>& m) {
  const std::size_t d = m.config().step_dim();
  if (text.vector.size() != d || video.vector.size() != d) {
    throw ShapeError("fuse: both inputs must have dim " + std::to_string(d));
  }
  ad::Graph<T>& g = *text.vector.graph();
  auto joint = ad::concat<T>({text.vector, video.vector});
  auto out = ad::add(ad::matmul(g.param(m.fusion_w()), joint), g.param(m.fusion_b()));
  return {out, Source::kFused};
}

}  // namespace procap::model
