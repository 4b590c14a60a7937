#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "procap/autodiff/lstm.hpp"
#include "procap/autodiff/tensor.hpp"
#include "procap/error.hpp"

namespace procap::model {

// Network sizes. The defaults are the full-scale configuration; the toy
// corpus runs a scaled-down copy.
struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t ingredient_size = 0;
  std::size_t embed_dim = 256;
  std::size_t encoder_hidden = 512;  // per direction
  std::size_t recipe_hidden = 1024;
  std::size_t decoder_hidden = 512;
  std::size_t feature_dim = 2048;
  std::size_t max_sentence_tokens = 60;
  std::size_t frame_stride = 5;

  // Dimension of every step representation (text, video, fused, predicted).
  std::size_t step_dim() const { return 2 * encoder_hidden; }

  void validate() const {
    if (vocab_size < 5) throw ShapeError("model: vocab_size must be at least 5");
    if (embed_dim == 0 || encoder_hidden == 0 || decoder_hidden == 0 || feature_dim == 0) {
      throw ShapeError("model: all layer sizes must be positive");
    }
    if (recipe_hidden != step_dim()) {
      throw ShapeError("model: recipe_hidden (" + std::to_string(recipe_hidden) +
                       ") must equal 2 x encoder_hidden (" + std::to_string(step_dim()) +
                       ") so predictions can replace encodings");
    }
    if (frame_stride == 0) throw ShapeError("model: frame_stride must be positive");
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"vocab_size", c.vocab_size},
       {"ingredient_size", c.ingredient_size},
       {"embed_dim", c.embed_dim},
       {"encoder_hidden", c.encoder_hidden},
       {"recipe_hidden", c.recipe_hidden},
       {"decoder_hidden", c.decoder_hidden},
       {"feature_dim", c.feature_dim},
       {"max_sentence_tokens", c.max_sentence_tokens},
       {"frame_stride", c.frame_stride}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("ingredient_size").get_to(c.ingredient_size);
  j.at("embed_dim").get_to(c.embed_dim);
  j.at("encoder_hidden").get_to(c.encoder_hidden);
  j.at("recipe_hidden").get_to(c.recipe_hidden);
  j.at("decoder_hidden").get_to(c.decoder_hidden);
  j.at("feature_dim").get_to(c.feature_dim);
  j.at("max_sentence_tokens").get_to(c.max_sentence_tokens);
  j.at("frame_stride").get_to(c.frame_stride);
}

// Which parameter groups a training stage updates.
enum class Stage { kText, kVideo, kVideoText };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::kText: return "text";
    case Stage::kVideo: return "video";
    case Stage::kVideoText: return "video-text";
  }
  return "?";
}

inline Stage parse_stage(std::string_view s) {
  if (s == "text") return Stage::kText;
  if (s == "video") return Stage::kVideo;
  if (s == "video-text" || s == "video_text") return Stage::kVideoText;
  throw Error("unknown stage '" + std::string(s) + "'");
}

// All four networks plus the shared embedding, the ingredient projection and
// the video-text fusion layer. Parameter names are prefixed by group:
// embedding, se., ve., fusion., re., sd.
template <class T>
class Model {
 public:
  explicit Model(ModelConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t d = cfg_.step_dim();
    embedding_ = &params_.add("embedding", {cfg_.vocab_size, cfg_.embed_dim});
    se_fwd_ = ad::LstmParams<T>::create(params_, "se.fwd", cfg_.embed_dim, cfg_.encoder_hidden);
    se_bwd_ = ad::LstmParams<T>::create(params_, "se.bwd", cfg_.embed_dim, cfg_.encoder_hidden);
    ve_fwd_ = ad::LstmParams<T>::create(params_, "ve.fwd", cfg_.feature_dim, cfg_.encoder_hidden);
    ve_bwd_ = ad::LstmParams<T>::create(params_, "ve.bwd", cfg_.feature_dim, cfg_.encoder_hidden);
    fusion_w_ = &params_.add("fusion.w", {d, 2 * d});
    fusion_b_ = &params_.add("fusion.b", {d});
    ing_w_ = &params_.add("re.ing.w", {d, cfg_.ingredient_size});
    ing_b_ = &params_.add("re.ing.b", {d});
    start_ = &params_.add("re.start", {d});
    re_ = ad::LstmParams<T>::create(params_, "re.lstm", d, cfg_.recipe_hidden);
    sd_ = ad::LstmParams<T>::create(params_, "sd.lstm", cfg_.embed_dim + d, cfg_.decoder_hidden);
    out_w_ = &params_.add("sd.out.w", {cfg_.vocab_size, cfg_.decoder_hidden});
    out_b_ = &params_.add("sd.out.b", {cfg_.vocab_size});
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for matrices and the start
  // vector, zero biases except LSTM forget gates (1.0).
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double bound) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      return static_cast<T>((2.0 * u - 1.0) * bound);
    };
    for (std::size_t i = 0; i < params_.size(); ++i) {
      ad::Parameter<T>& p = params_[i];
      if (p.shape.size() == 2) {
        const std::size_t fan_in = p.shape[1];
        const double bound = fan_in == 0 ? 0.0 : 1.0 / std::sqrt(double(fan_in));
        for (auto& v : p.value) v = uniform(bound);
      } else if (&p == start_) {
        const double bound = 1.0 / std::sqrt(double(p.size()));
        for (auto& v : p.value) v = uniform(bound);
      } else {
        std::fill(p.value.begin(), p.value.end(), T(0));
      }
    }
    for (const auto* lstm : {&se_fwd_, &se_bwd_, &ve_fwd_, &ve_bwd_, &re_, &sd_}) {
      const std::size_t h = lstm->hidden_dim;
      std::fill(lstm->b->value.begin() + static_cast<std::ptrdiff_t>(h),
                lstm->b->value.begin() + static_cast<std::ptrdiff_t>(2 * h), T(1));
    }
  }

  // Marks every parameter outside the groups trained by `stage` as frozen.
  void freeze_for(Stage stage) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      ad::Parameter<T>& p = params_[i];
      const std::string& n = p.name;
      bool trainable = false;
      switch (stage) {
        case Stage::kText:
          trainable = n == "embedding" || n.starts_with("se.") || n.starts_with("re.") ||
                      n.starts_with("sd.");
          break;
        case Stage::kVideo:
          trainable = n.starts_with("ve.");
          break;
        case Stage::kVideoText:
          trainable = n.starts_with("ve.") || n.starts_with("fusion.");
          break;
      }
      p.frozen = !trainable;
    }
  }

  void unfreeze_all() {
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].frozen = false;
  }

  // Deep copy with a different scalar type (frozen flags preserved).
  template <class U>
  Model<U> cast() const {
    Model<U> out(cfg_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const ad::Parameter<T>& src = params_[i];
      ad::Parameter<U>& dst = out.params()[i];
      for (std::size_t k = 0; k < src.size(); ++k) dst.value[k] = static_cast<U>(src.value[k]);
      dst.frozen = src.frozen;
    }
    return out;
  }

  Model clone() const { return cast<T>(); }

  const ModelConfig& config() const { return cfg_; }
  ad::ParameterSet<T>& params() { return params_; }
  const ad::ParameterSet<T>& params() const { return params_; }

  ad::Parameter<T>& embedding() const { return *embedding_; }
  const ad::LstmParams<T>& se_fwd() const { return se_fwd_; }
  const ad::LstmParams<T>& se_bwd() const { return se_bwd_; }
  const ad::LstmParams<T>& ve_fwd() const { return ve_fwd_; }
  const ad::LstmParams<T>& ve_bwd() const { return ve_bwd_; }
  const ad::LstmParams<T>& recipe_lstm() const { return re_; }
  const ad::LstmParams<T>& decoder_lstm() const { return sd_; }
  ad::Parameter<T>& fusion_w() const { return *fusion_w_; }
  ad::Parameter<T>& fusion_b() const { return *fusion_b_; }
  ad::Parameter<T>& ingredient_w() const { return *ing_w_; }
  ad::Parameter<T>& ingredient_b() const { return *ing_b_; }
  ad::Parameter<T>& start_vector() const { return *start_; }
  ad::Parameter<T>& output_w() const { return *out_w_; }
  ad::Parameter<T>& output_b() const { return *out_b_; }

 private:
  ModelConfig cfg_;
  ad::ParameterSet<T> params_;
  ad::Parameter<T>* embedding_ = nullptr;
  ad::LstmParams<T> se_fwd_, se_bwd_, ve_fwd_, ve_bwd_, re_, sd_;
  ad::Parameter<T>* fusion_w_ = nullptr;
  ad::Parameter<T>* fusion_b_ = nullptr;
  ad::Parameter<T>* ing_w_ = nullptr;
  ad::Parameter<T>* ing_b_ = nullptr;
  ad::Parameter<T>* start_ = nullptr;
  ad::Parameter<T>* out_w_ = nullptr;
  ad::Parameter<T>* out_b_ = nullptr;
};

}  // namespace procap::model
