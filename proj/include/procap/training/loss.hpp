#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "procap/autodiff/tensor.hpp"
#include "procap/corpus/features.hpp"
#include "procap/corpus/recipe.hpp"
#include "procap/corpus/tokenizer.hpp"
#include "procap/corpus/vocabulary.hpp"
#include "procap/log.hpp"
#include "procap/model/decoder.hpp"
#include "procap/model/encoders.hpp"
#include "procap/model/recipe_net.hpp"
#include "procap/training/config.hpp"

namespace procap::train {

using corpus::TokenId;

// A recipe mapped to ids once, with its video features loaded when the
// stage needs them.
struct PreparedRecipe {
  std::string id;
  std::size_t index = 0;  // position in the prepared list; keys sampling draws
  std::vector<float> ingredients;
  std::vector<std::vector<TokenId>> steps;  // truncated, without EOS
  std::shared_ptr<const corpus::FeatureMatrix> frames;
  std::vector<corpus::Segment> segments;

  std::size_t num_steps() const { return steps.size(); }
};

inline bool needs_video(Stage s) { return s != Stage::kText; }

// Maps recipes to ids. Sentences longer than `max_tokens` are truncated with
// a warning. For video stages, recipes without a manifest or whose segment
// count differs from their step count are skipped with a warning.
inline std::vector<PreparedRecipe> prepare_recipes(const std::vector<const corpus::Recipe*>& recipes,
                                                   const corpus::Vocabulary& vocab,
                                                   const corpus::IngredientVocabulary& iv, Stage stage,
                                                   std::size_t max_tokens, Diagnostics* diag = nullptr) {
  std::vector<PreparedRecipe> out;
  for (const corpus::Recipe* r : recipes) {
    PreparedRecipe p;
    p.id = r->id;
    p.ingredients = corpus::encode_ingredients(*r, iv);
    bool ok = true;
    for (std::size_t s = 0; s < r->steps.size(); ++s) {
      auto toks = corpus::tokenize(r->steps[s]);
      if (toks.empty()) {
        warn(diag, "recipe '" + r->id + "' step " + std::to_string(s + 1) + " has no tokens; recipe skipped");
        ok = false;
        break;
      }
      if (toks.size() > max_tokens) {
        warn(diag, "recipe '" + r->id + "' step " + std::to_string(s + 1) + " truncated from " +
                       std::to_string(toks.size()) + " to " + std::to_string(max_tokens) + " tokens");
        toks.resize(max_tokens);
      }
      p.steps.push_back(vocab.encode(toks));
    }
    if (!ok) continue;
    if (needs_video(stage)) {
      if (!r->video) {
        warn(diag, "recipe '" + r->id + "' has no video manifest; skipped for video training");
        continue;
      }
      if (r->video->segments.size() != r->steps.size()) {
        warn(diag, "recipe '" + r->id + "' has " + std::to_string(r->video->segments.size()) +
                       " segments for " + std::to_string(r->steps.size()) + " steps; skipped for video training");
        continue;
      }
      p.frames = std::make_shared<const corpus::FeatureMatrix>(corpus::load_features(*r->video));
      p.segments = r->video->segments;
    }
    p.index = out.size();
    out.push_back(std::move(p));
  }
  return out;
}

// Counts which kind of input the recipe RNN consumed.
struct SamplingCounter {
  std::size_t encoder_inputs = 0;
  std::size_t predicted_inputs = 0;
};

// Per-(epoch, recipe, step) Bernoulli draws from a counter-based hash, so
// they do not depend on the shuffle order or on any other random stream.
class SamplingSchedule {
 public:
  SamplingSchedule() = default;
  SamplingSchedule(ScheduledSampling cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {}

  bool use_prediction(std::size_t epoch, std::size_t recipe, std::size_t step) const {
    if (!cfg_.enabled || epoch < cfg_.start_epoch || cfg_.prob <= 0) return false;
    std::uint64_t h = mix(seed_ ^ 0x5ca1ab1e0ddba11ULL);
    h = mix(h ^ epoch);
    h = mix(h ^ recipe);
    h = mix(h ^ step);
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return u < cfg_.prob;
  }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  ScheduledSampling cfg_{false, 0.0, 0};
  std::uint64_t seed_ = 0;
};

template <class T>
struct RecipeLoss {
  ad::Tensor<T> decoder;  // L_d: summed token NLL over all steps
  ad::Tensor<T> recipe;   // L_r: summed squared distance over all steps
  std::size_t tokens = 0;

  ad::Tensor<T> total(double alpha) const { return ad::add(decoder, ad::scale(recipe, static_cast<T>(alpha))); }
};

// Encoding of step `j` for the stage: sentence, video segment, or both fused.
template <class T>
model::StepRepr<T> encode_step(ad::Graph<T>& g, const model::Model<T>& m, const PreparedRecipe& r, std::size_t j,
                               Stage stage) {
  if (stage == Stage::kText) return model::encode_sentence<T>(g, m, r.steps[j]);
  if (!r.frames) throw DataError("recipe '" + r.id + "' has no video features loaded");
  auto video = model::encode_video_segment<T>(g, m, *r.frames, r.segments[j], m.config().frame_stride);
  if (stage == Stage::kVideo) return video;
  return model::fuse(model::encode_sentence<T>(g, m, r.steps[j]), video, m);
}

// Rolls the recipe RNN from the ingredient initialization. For every step j
// the current prediction is decoded against step j's sentence (plus EOS) and
// compared with step j's encoding; the next input is that encoding, or the
// prediction itself when the sampling schedule fires.
template <class T>
RecipeLoss<T> recipe_forward_loss(ad::Graph<T>& g, const model::Model<T>& m, const PreparedRecipe& r,
                                  Stage stage, bool no_ingredients, const SamplingSchedule& schedule = {},
                                  std::size_t epoch = 0, SamplingCounter* counter = nullptr) {
  if (r.steps.empty()) throw Error("recipe '" + r.id + "' has no steps");
  auto [state, r0] = model::init_from_ingredients(g, m, std::span<const float>(r.ingredients), no_ingredients);
  std::vector<ad::Tensor<T>> nll, dist;
  RecipeLoss<T> out;
  for (std::size_t j = 0; j < r.steps.size(); ++j) {
    const model::StepRepr<T> pred = state.prediction();
    std::vector<TokenId> target = r.steps[j];
    target.push_back(corpus::kEos);
    out.tokens += target.size();
    nll.push_back(model::teacher_forced_nll(pred, std::span<const TokenId>(target), m));
    const model::StepRepr<T> enc = encode_step(g, m, r, j, stage);
    dist.push_back(ad::squared_distance(enc.vector, pred.vector));
    if (j + 1 == r.steps.size()) break;
    const bool sampled = schedule.use_prediction(epoch, r.index, j);
    if (counter != nullptr) ++(sampled ? counter->predicted_inputs : counter->encoder_inputs);
    state = model::advance(state, sampled ? pred : enc, m);
  }
  out.decoder = ad::sum(ad::concat(nll));
  out.recipe = ad::sum(ad::concat(dist));
  return out;
}

}  // namespace procap::train
