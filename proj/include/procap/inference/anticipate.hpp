#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "procap/corpus/features.hpp"
#include "procap/corpus/recipe.hpp"
#include "procap/corpus/tokenizer.hpp"
#include "procap/corpus/vocabulary.hpp"
#include "procap/error.hpp"
#include "procap/inference/segmentation.hpp"
#include "procap/inference/trace.hpp"
#include "procap/model/decoder.hpp"
#include "procap/model/encoders.hpp"
#include "procap/model/recipe_net.hpp"

namespace procap::infer {

enum class Modality { kText, kVideo, kVideoText };

inline const char* to_string(Modality m) {
  switch (m) {
    case Modality::kText: return "text";
    case Modality::kVideo: return "video";
    case Modality::kVideoText: return "video-text";
  }
  return "?";
}

inline Modality parse_modality(const std::string& s) {
  if (s == "text") return Modality::kText;
  if (s == "video") return Modality::kVideo;
  if (s == "video-text" || s == "video_text") return Modality::kVideoText;
  throw Error("unknown modality '" + s + "' (expected text, video or video-text)");
}

// Greedy, or beam search with width `beam`.
struct DecodeOptions {
  std::size_t beam = 0;  // 0 = greedy
  std::size_t max_len = 30;

  static DecodeOptions parse(const std::string& s) {
    if (s == "greedy") return {};
    if (s.rfind("beam", 0) == 0 && s.size() > 4 && s.find_first_not_of("0123456789", 4) == std::string::npos) {
      const std::size_t k = std::stoul(s.substr(4));
      if (k == 0) throw Error("beam width must be at least 1");
      return {k, 30};
    }
    throw Error("unknown decoding '" + s + "' (expected greedy or beamK, e.g. beam5)");
  }

  std::string describe() const { return beam == 0 ? "greedy" : "beam" + std::to_string(beam); }
};

struct AnticipateOptions {
  Modality modality = Modality::kText;
  SegmentationStrategy strategy;
  std::size_t horizons = 4;
  DecodeOptions decode;
  bool no_ingredients = false;
};

struct Vocabularies {
  const corpus::Vocabulary* words;
  const corpus::IngredientVocabulary* ingredients;
};

namespace detail {

// Context items fed to the recipe RNN, in temporal order.
template <class T>
std::vector<model::StepRepr<T>> context_items(ad::Graph<T>& g, const model::Model<T>& m, const corpus::Recipe& r,
                                              const corpus::Vocabulary& vocab, const AnticipateOptions& opt) {
  std::vector<model::StepRepr<T>> items;
  auto text_item = [&](std::size_t s) {
    auto toks = corpus::tokenize(r.steps[s]);
    if (toks.size() > m.config().max_sentence_tokens) toks.resize(m.config().max_sentence_tokens);
    const auto ids = vocab.encode(toks);
    return model::encode_sentence<T>(g, m, ids);
  };
  if (opt.modality == Modality::kText) {
    if (opt.strategy.kind != SegmentationStrategy::Kind::kGroundTruth) {
      throw Error("text modality supports only the gt strategy");
    }
    for (std::size_t s = 0; s < r.steps.size(); ++s) items.push_back(text_item(s));
    return items;
  }
  if (!r.video) throw DataError("recipe '" + r.id + "' has no video manifest");
  const corpus::FeatureMatrix frames = corpus::load_features(*r.video);
  const auto segs = segment_video(*r.video, opt.strategy, r.video->num_frames, r.id);
  if (opt.modality == Modality::kVideoText) {
    if (opt.strategy.kind != SegmentationStrategy::Kind::kGroundTruth) {
      throw Error("video-text modality supports only the gt strategy");
    }
    if (segs.size() != r.steps.size()) {
      throw DataError("recipe '" + r.id + "': segment count differs from step count");
    }
  }
  for (std::size_t s = 0; s < segs.size(); ++s) {
    auto v = model::encode_video_segment<T>(g, m, frames, segs[s], m.config().frame_stride);
    items.push_back(opt.modality == Modality::kVideoText ? model::fuse(text_item(s), v, m) : v);
  }
  return items;
}

template <class T>
Prediction decode_prediction(const model::StepRepr<T>& pred, const model::Model<T>& m,
                             const corpus::Vocabulary& vocab, const DecodeOptions& dec) {
  const std::vector<T>& v = pred.vector.value();
  const std::span<const T> values(v);
  const model::Hypothesis hyp =
      dec.beam == 0 ? model::decode_greedy(values, m, dec.max_len) : model::decode_beam(values, m, dec.beam, dec.max_len);
  Prediction p;
  p.tokens = hyp.words();
  p.words = vocab.decode(p.tokens);
  p.logprob = hyp.logprob;
  double sq = 0;
  for (T x : v) sq += double(x) * double(x);
  p.rhat_norm = std::sqrt(sq);
  return p;
}

}  // namespace detail

// For each observed prefix length j (0 up to the number of context items,
// capped at N-1), feeds the first j context items and then rolls the recipe
// RNN forward on its own predictions, decoding the horizon-h prediction
// whenever ground-truth step j+h exists.
template <class T>
PredictionTrace anticipate(const corpus::Recipe& r, const model::Model<T>& m, const Vocabularies& v,
                           const AnticipateOptions& opt) {
  if (opt.horizons == 0) throw Error("horizons must be at least 1");
  ad::Graph<T> g;
  const auto items = detail::context_items(g, m, r, *v.words, opt);
  const auto ing = corpus::encode_ingredients(r, *v.ingredients);
  auto [state, r0] = model::init_from_ingredients(g, m, std::span<const float>(ing), opt.no_ingredients);

  PredictionTrace trace;
  trace.recipe_id = r.id;
  trace.modality = to_string(opt.modality);
  trace.strategy = opt.strategy.describe();
  trace.decode = opt.decode.describe();
  trace.num_steps = r.steps.size();
  trace.context_items = items.size();
  const std::size_t n = r.steps.size();
  const std::size_t last_row = std::min(items.size(), n - 1);
  for (std::size_t j = 0; j <= last_row; ++j) {
    if (j > 0) state = model::advance(state, items[j - 1], m);
    PrefixRow row;
    row.observed = j;
    model::RecipeState<T> rollout = state;
    for (std::size_t h = 1; h <= opt.horizons && j + h <= n; ++h) {
      const auto pred = rollout.prediction();
      Prediction p = detail::decode_prediction(pred, m, *v.words, opt.decode);
      p.horizon = h;
      p.target_step = j + h;
      row.predictions.push_back(std::move(p));
      if (h < opt.horizons && j + h < n) rollout = model::advance(rollout, pred, m);
    }
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

// Runs `anticipate` per recipe on `threads` workers; the output order
// matches the input order. The first failure is rethrown.
template <class T>
std::vector<PredictionTrace> anticipate_all(const std::vector<const corpus::Recipe*>& recipes,
                                            const model::Model<T>& m, const Vocabularies& v,
                                            const AnticipateOptions& opt, std::size_t threads = 1) {
  std::vector<PredictionTrace> out(recipes.size());
  if (threads <= 1 || recipes.size() <= 1) {
    for (std::size_t i = 0; i < recipes.size(); ++i) out[i] = anticipate(*recipes[i], m, v, opt);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < recipes.size(); i = next++) {
      try {
        out[i] = anticipate(*recipes[i], m, v, opt);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, recipes.size()); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace procap::infer
