#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "procap/autodiff/checkpoint.hpp"
#include "procap/corpus/vocabulary.hpp"
#include "procap/error.hpp"
#include "procap/model/model.hpp"

namespace procap::io {

// A trained model together with the vocabularies it was built over. The
// vocabularies travel inside the checkpoint metadata.
struct ModelBundle {
  corpus::Vocabulary vocab;
  corpus::IngredientVocabulary ingredients;
  model::Model<float> model;
  nlohmann::json metadata;
};

inline nlohmann::json vocabulary_metadata(const corpus::Vocabulary& v, const corpus::IngredientVocabulary& iv) {
  return {{"vocab", v.words()}, {"ingredients", iv.entries()}};
}

inline ModelBundle load_bundle(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("checkpoint not found: " + path.string());
  const ad::Checkpoint ck = ad::load_checkpoint(path);
  const auto& meta = ck.metadata;
  if (!meta.contains("model_config") || !meta.contains("vocab") || !meta.contains("ingredients")) {
    throw DataError("checkpoint " + path.string() + " lacks model_config or vocabulary metadata");
  }
  corpus::Vocabulary vocab(meta.at("vocab").get<std::vector<std::string>>());
  corpus::IngredientVocabulary iv(meta.at("ingredients").get<std::vector<std::string>>());
  auto mc = meta.at("model_config").get<model::ModelConfig>();
  if (mc.vocab_size != vocab.size() || mc.ingredient_size != iv.size()) {
    throw DataError("checkpoint " + path.string() + ": vocabulary sizes disagree with model_config");
  }
  model::Model<float> m(mc);
  ad::restore_parameters(ck, m.params());
  return {std::move(vocab), std::move(iv), std::move(m), meta};
}

// Reads any subset of ModelConfig keys over `c`.
inline void merge_model_config(const nlohmann::json& j, model::ModelConfig& c) {
  auto take = [&](const char* key, std::size_t& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  take("embed_dim", c.embed_dim);
  take("encoder_hidden", c.encoder_hidden);
  take("recipe_hidden", c.recipe_hidden);
  take("decoder_hidden", c.decoder_hidden);
  take("feature_dim", c.feature_dim);
  take("max_sentence_tokens", c.max_sentence_tokens);
  take("frame_stride", c.frame_stride);
}

}  // namespace procap::io
