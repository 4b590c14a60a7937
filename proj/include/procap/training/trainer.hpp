#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "procap/autodiff/adam.hpp"
#include "procap/autodiff/checkpoint.hpp"
#include "procap/error.hpp"
#include "procap/log.hpp"
#include "procap/model/model.hpp"
#include "procap/training/config.hpp"
#include "procap/training/loss.hpp"

namespace procap::train {

using model::Model;

struct LossSummary {
  double decoder = 0;  // mean per recipe
  double recipe = 0;   // mean per recipe
  std::size_t recipes = 0;
  std::size_t tokens = 0;

  double per_token() const { return tokens ? decoder * double(recipes) / double(tokens) : 0.0; }
};

// Teacher-forced losses with encoder inputs only.
template <class T>
LossSummary evaluate_loss(const Model<T>& m, const std::vector<PreparedRecipe>& recipes, Stage stage,
                          bool no_ingredients) {
  LossSummary s;
  for (const auto& r : recipes) {
    ad::Graph<T> g;
    auto loss = recipe_forward_loss(g, m, r, stage, no_ingredients);
    s.decoder += double(loss.decoder.item());
    s.recipe += double(loss.recipe.item());
    s.tokens += loss.tokens;
    ++s.recipes;
  }
  if (s.recipes > 0) {
    s.decoder /= double(s.recipes);
    s.recipe /= double(s.recipes);
  }
  return s;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double decoder_loss = 0;
  double recipe_loss = 0;
  double total_loss = 0;
  std::optional<double> val_decoder_loss;
  double wall_seconds = 0;
  double grad_norm_mean = 0;
  double grad_norm_max = 0;
  std::size_t batches = 0;
  std::size_t clipped_batches = 0;
  SamplingCounter inputs;
};

inline nlohmann::json to_json(const EpochRecord& e) {
  return {{"epoch", e.epoch},
          {"decoder_loss", e.decoder_loss},
          {"recipe_loss", e.recipe_loss},
          {"total_loss", e.total_loss},
          {"val_decoder_loss", e.val_decoder_loss ? nlohmann::json(*e.val_decoder_loss) : nlohmann::json(nullptr)},
          {"wall_seconds", e.wall_seconds},
          {"grad_norm_mean", e.grad_norm_mean},
          {"grad_norm_max", e.grad_norm_max},
          {"batches", e.batches},
          {"clipped_batches", e.clipped_batches},
          {"encoder_inputs", e.inputs.encoder_inputs},
          {"predicted_inputs", e.inputs.predicted_inputs}};
}

struct TrainLog {
  LossSummary initial_train;
  std::optional<double> initial_val_decoder_loss;
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> best_epoch;  // by validation L_d
  std::size_t selected_epoch = 0;         // 0 means the initialization
};

struct TrainResult {
  Model<float> model;
  TrainLog log;
};

struct TrainData {
  std::vector<PreparedRecipe> train;
  std::vector<PreparedRecipe> val;
};

// Optional side outputs. With `out_dir` set, last.ckpt is written after every
// epoch, best.ckpt whenever validation L_d improves, model.ckpt (the selected
// parameters) at the end, and train_log.jsonl gets one line per epoch.
struct TrainHooks {
  std::optional<std::filesystem::path> out_dir;
  nlohmann::json metadata = nlohmann::json::object();
  std::function<void(const EpochRecord&)> on_epoch;
  Diagnostics* diag = nullptr;
};

namespace detail {

inline nlohmann::json checkpoint_metadata(const TrainHooks& hooks, const TrainConfig& cfg,
                                          const model::ModelConfig& mc, std::size_t epoch) {
  nlohmann::json meta = hooks.metadata;
  meta["model_config"] = mc;
  meta["train_config"] = cfg;
  meta["epoch"] = epoch;
  return meta;
}

}  // namespace detail

// Minibatch Adam over the training recipes. Only the parameter groups of
// `cfg.stage` are updated; all others are frozen and get no optimizer state.
// Each batch loss is the mean of its per-recipe losses.
inline TrainResult train(Model<float> model, const TrainData& data, const TrainConfig& cfg,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  if (data.train.empty()) throw DataError("no usable training recipes for stage " + std::string(model::to_string(cfg.stage)));
  model.freeze_for(cfg.stage);
  const Stage stage = cfg.stage;
  const bool use_lr = cfg.recipe_loss_active();
  const std::size_t epochs = cfg.resolved_epochs();

  TrainResult result{model.clone(), {}};
  TrainLog& log = result.log;
  log.initial_train = evaluate_loss(model, data.train, stage, cfg.no_ingredients);
  if (!data.val.empty()) {
    log.initial_val_decoder_loss = evaluate_loss(model, data.val, stage, cfg.no_ingredients).decoder;
  }

  std::optional<Model<float>> best;
  double best_val = log.initial_val_decoder_loss.value_or(INFINITY);
  const model::ModelConfig mc = model.config();

  std::ofstream log_file;
  if (hooks.out_dir) {
    std::filesystem::create_directories(*hooks.out_dir);
    log_file.open(*hooks.out_dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
    if (!log_file) throw DataError("cannot write " + (*hooks.out_dir / "train_log.jsonl").string());
  }

  ad::AdamState<float> adam;
  adam.lr = static_cast<float>(cfg.lr);
  const SamplingSchedule schedule(cfg.sampling, cfg.seed);
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x7368756666ULL);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const float inv = 1.0f / float(end - start);
      model.params().zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const PreparedRecipe& r = data.train[order[k]];
        ad::Graph<float> g;
        auto loss = recipe_forward_loss(g, model, r, stage, cfg.no_ingredients, schedule, epoch, &rec.inputs);
        const double ld = loss.decoder.item(), lr = loss.recipe.item();
        if (!std::isfinite(ld) || !std::isfinite(lr)) {
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                               std::to_string(batch + 1) + " (recipe '" + r.id + "')");
        }
        rec.decoder_loss += ld;
        rec.recipe_loss += lr;
        rec.total_loss += ld + cfg.alpha * lr;
        auto objective = use_lr ? loss.total(cfg.alpha) : loss.decoder;
        g.backward(ad::scale(objective, inv));
      }
      ad::AdamStepStats st;
      try {
        st = ad::adam_step(model.params(), adam, cfg.clip_norm);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch + 1) + ", batch " +
                             std::to_string(batch + 1));
      }
      ++rec.batches;
      rec.grad_norm_mean += st.grad_norm;
      rec.grad_norm_max = std::max(rec.grad_norm_max, st.grad_norm);
      if (st.clip_scale < 1) ++rec.clipped_batches;
    }
    const double n = double(order.size());
    rec.decoder_loss /= n;
    rec.recipe_loss /= n;
    rec.total_loss /= n;
    rec.grad_norm_mean /= double(std::max<std::size_t>(rec.batches, 1));
    if (!data.val.empty()) rec.val_decoder_loss = evaluate_loss(model, data.val, stage, cfg.no_ingredients).decoder;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const bool improved = rec.val_decoder_loss && *rec.val_decoder_loss < best_val;
    if (improved) {
      best_val = *rec.val_decoder_loss;
      best = model.clone();
      log.best_epoch = rec.epoch;
    }
    if (hooks.out_dir) {
      const auto meta = detail::checkpoint_metadata(hooks, cfg, mc, rec.epoch);
      ad::save_checkpoint(*hooks.out_dir / "last.ckpt", meta, model.params(), &adam);
      if (improved) ad::save_checkpoint<float>(*hooks.out_dir / "best.ckpt", meta, model.params(), nullptr);
      log_file << to_json(rec).dump() << '\n' << std::flush;
    }
    if (hooks.on_epoch) hooks.on_epoch(rec);
    log.epochs.push_back(rec);
  }

  if (cfg.selection == Selection::kBestVal && data.val.empty() && epochs > 0) {
    warn(hooks.diag, "no validation recipes; selecting the last epoch");
  }
  if (cfg.selection == Selection::kBestVal && best) {
    result.model = std::move(*best);
    log.selected_epoch = *log.best_epoch;
  } else if (cfg.selection == Selection::kBestVal && !data.val.empty()) {
    log.selected_epoch = 0;  // no epoch beat the initialization on validation
  } else {
    result.model = model.clone();
    log.selected_epoch = epochs;
  }
  result.model.freeze_for(stage);
  if (hooks.out_dir) {
    ad::save_checkpoint<float>(*hooks.out_dir / "model.ckpt",
                               detail::checkpoint_metadata(hooks, cfg, mc, log.selected_epoch),
                               result.model.params(), nullptr);
  }
  return result;
}

// Joint sentence-encoder, recipe-RNN and decoder training from a fresh
// initialization seeded by `cfg.seed`.
inline TrainResult train_text(const model::ModelConfig& mc, const TrainData& data, TrainConfig cfg,
                              const TrainHooks& hooks = {}) {
  if (cfg.stage != Stage::kText) throw Error("train_text: stage must be text");
  Model<float> m(mc);
  m.initialize(cfg.seed);
  return train(std::move(m), data, cfg, hooks);
}

// Grounds the video encoder (and the fusion layer for video-text) in the
// space learned by a text-stage model, which stays frozen.
inline TrainResult train_video(const Model<float>& pretrained, const TrainData& data, TrainConfig cfg,
                               const TrainHooks& hooks = {}) {
  if (cfg.stage == Stage::kText) throw Error("train_video: stage must be video or video-text");
  return train(pretrained.clone(), data, cfg, hooks);
}

}  // namespace procap::train
