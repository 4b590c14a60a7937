#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "procap/error.hpp"
#include "procap/model/model.hpp"

namespace procap::train {

using model::Stage;

struct ScheduledSampling {
  bool enabled = true;
  double prob = 0.5;
  std::size_t start_epoch = 5;  // 0-based; epochs >= start_epoch may sample
};

enum class Selection { kBestVal, kLast };

inline const char* to_string(Selection s) { return s == Selection::kBestVal ? "best_val" : "last"; }

inline Selection parse_selection(const std::string& s) {
  if (s == "best_val") return Selection::kBestVal;
  if (s == "last") return Selection::kLast;
  throw Error("unknown model selection '" + s + "' (expected best_val or last)");
}

struct TrainConfig {
  Stage stage = Stage::kText;
  std::optional<std::size_t> epochs;  // unset: stage default
  std::size_t batch_size = 50;
  double lr = 1e-3;
  double alpha = 0.1;
  bool use_recipe_loss = false;
  bool video_recipe_loss = false;  // L_r between video encodings and predictions
  ScheduledSampling sampling;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;
  bool no_ingredients = false;
  Selection selection = Selection::kBestVal;

  std::size_t resolved_epochs() const {
    if (epochs) return *epochs;
    if (stage != Stage::kText) return 25;
    return use_recipe_loss ? 10 : 50;
  }

  // Whether L_r enters the optimized objective for this stage.
  bool recipe_loss_active() const { return stage == Stage::kText ? use_recipe_loss : video_recipe_loss; }

  void validate() const {
    if (alpha < 0) throw Error("alpha must be non-negative, got " + std::to_string(alpha));
    if (sampling.prob < 0 || sampling.prob > 1) {
      throw Error("scheduled-sampling probability must lie in [0, 1], got " + std::to_string(sampling.prob));
    }
    if (batch_size == 0) throw Error("batch size must be at least 1");
    if (!(lr > 0)) throw Error("learning rate must be positive");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"stage", model::to_string(c.stage)},
       {"epochs", c.resolved_epochs()},
       {"batch_size", c.batch_size},
       {"lr", c.lr},
       {"alpha", c.alpha},
       {"use_recipe_loss", c.use_recipe_loss},
       {"video_recipe_loss", c.video_recipe_loss},
       {"scheduled_sampling",
        {{"enabled", c.sampling.enabled}, {"prob", c.sampling.prob}, {"start_epoch", c.sampling.start_epoch}}},
       {"seed", c.seed},
       {"clip_norm", c.clip_norm},
       {"no_ing", c.no_ingredients},
       {"selection", to_string(c.selection)}};
}

// Reads any subset of the keys written by to_json over `c`.
inline void merge_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("stage")) c.stage = model::parse_stage(j.at("stage").get<std::string>());
  if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("batch_size")) j.at("batch_size").get_to(c.batch_size);
  if (j.contains("lr")) j.at("lr").get_to(c.lr);
  if (j.contains("alpha")) j.at("alpha").get_to(c.alpha);
  if (j.contains("use_recipe_loss")) j.at("use_recipe_loss").get_to(c.use_recipe_loss);
  if (j.contains("video_recipe_loss")) j.at("video_recipe_loss").get_to(c.video_recipe_loss);
  if (j.contains("scheduled_sampling")) {
    const auto& s = j.at("scheduled_sampling");
    if (s.contains("enabled")) s.at("enabled").get_to(c.sampling.enabled);
    if (s.contains("prob")) s.at("prob").get_to(c.sampling.prob);
    if (s.contains("start_epoch")) s.at("start_epoch").get_to(c.sampling.start_epoch);
  }
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
  if (j.contains("clip_norm")) j.at("clip_norm").get_to(c.clip_norm);
  if (j.contains("no_ing")) j.at("no_ing").get_to(c.no_ingredients);
  if (j.contains("selection")) c.selection = parse_selection(j.at("selection").get<std::string>());
}

}  // namespace procap::train
