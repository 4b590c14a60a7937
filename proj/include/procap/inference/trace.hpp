#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "procap/corpus/vocabulary.hpp"

namespace procap::infer {

// One decoded future step. `target_step` is the 1-based ground-truth step
// the prediction is scored against: observed prefix length + horizon.
struct Prediction {
  std::size_t horizon = 1;
  std::size_t target_step = 1;
  std::vector<corpus::TokenId> tokens;  // without EOS
  std::vector<std::string> words;
  double logprob = 0;
  double rhat_norm = 0;
};

struct PrefixRow {
  std::size_t observed = 0;  // number of context items fed before predicting
  std::vector<Prediction> predictions;
};

struct PredictionTrace {
  std::string recipe_id;
  std::string modality;
  std::string strategy;
  std::string decode;
  std::size_t num_steps = 0;
  std::size_t context_items = 0;
  std::vector<PrefixRow> rows;
};

inline void to_json(nlohmann::json& j, const Prediction& p) {
  j = {{"horizon", p.horizon},       {"target_step", p.target_step}, {"tokens", p.tokens},
       {"words", p.words},           {"logprob", p.logprob},         {"rhat_norm", p.rhat_norm}};
}

inline void from_json(const nlohmann::json& j, Prediction& p) {
  j.at("horizon").get_to(p.horizon);
  j.at("target_step").get_to(p.target_step);
  j.at("tokens").get_to(p.tokens);
  j.at("words").get_to(p.words);
  j.at("logprob").get_to(p.logprob);
  j.at("rhat_norm").get_to(p.rhat_norm);
}

inline void to_json(nlohmann::json& j, const PrefixRow& r) {
  j = {{"observed", r.observed}, {"predictions", r.predictions}};
}

inline void from_json(const nlohmann::json& j, PrefixRow& r) {
  j.at("observed").get_to(r.observed);
  j.at("predictions").get_to(r.predictions);
}

inline void to_json(nlohmann::json& j, const PredictionTrace& t) {
  j = {{"recipe_id", t.recipe_id}, {"modality", t.modality},   {"strategy", t.strategy},
       {"decode", t.decode},       {"num_steps", t.num_steps}, {"context_items", t.context_items},
       {"rows", t.rows}};
}

inline void from_json(const nlohmann::json& j, PredictionTrace& t) {
  j.at("recipe_id").get_to(t.recipe_id);
  j.at("modality").get_to(t.modality);
  j.at("strategy").get_to(t.strategy);
  j.at("decode").get_to(t.decode);
  j.at("num_steps").get_to(t.num_steps);
  j.at("context_items").get_to(t.context_items);
  j.at("rows").get_to(t.rows);
}

}  // namespace procap::infer
