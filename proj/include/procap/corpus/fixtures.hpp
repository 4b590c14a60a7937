#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "procap/corpus/features.hpp"
#include "procap/corpus/recipe.hpp"
#include "procap/corpus/tokenizer.hpp"
#include "procap/error.hpp"

namespace procap::corpus {

// Synthetic toy corpus: 20 recipes of 6-10 steps over a 30-word vocabulary,
// with a step grammar driven by the ingredient set plus 16-dim "video" features made by
// a fixed random linear map of each step's word counts.
struct ToyFixtureOptions {
  std::uint64_t seed = 20240611;
  std::size_t num_recipes = 20;
  std::size_t num_val = 2;
  std::size_t num_test = 2;
  std::size_t feature_dim = 16;
  double noise = 0.1;
};

namespace toy {

inline const std::vector<std::string>& words() {
  static const std::vector<std::string> w = {
      "preheat", "the",    "oven",   "boil",  "water",  "wash",   "and",    "chop",    "slice",  "mix",
      "with",    "add",    "to",     "pan",   "stir",   "season", "pepper", "fry",     "bake",   "serve",
      "hot",     "onion",  "garlic", "tomato", "egg",   "flour",  "butter", "rice",    "chicken", "cheese"};
  return w;
}

// Canonical order; steps mention ingredients in this order.
inline const std::vector<std::string>& ingredients() {
  static const std::vector<std::string> i = {"onion", "garlic", "tomato", "egg",     "flour",
                                             "butter", "rice",  "chicken", "cheese", "pepper"};
  return i;
}

inline bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

// `prep[i]` selects whether the i-th non-pepper ingredient gets a preparation
// step before it is added.
inline std::vector<std::string> steps_for(const std::vector<std::string>& ings, const std::vector<bool>& prep) {
  std::vector<std::string> steps;
  steps.push_back(contains(ings, "rice") ? "boil the water" : "preheat the oven");
  std::size_t k = 0;
  for (const auto& x : ings) {
    if (x == "pepper") continue;
    if (prep.at(k++)) {
      if (x == "onion" || x == "garlic" || x == "tomato") {
        steps.push_back("wash and chop the " + x);
      } else if (x == "chicken" || x == "cheese") {
        steps.push_back("slice the " + x);
      } else {
        steps.push_back("mix the " + x + " with water");
      }
    }
    steps.push_back("add the " + x + " to the pan and stir");
  }
  if (contains(ings, "pepper")) steps.push_back("season with pepper");
  steps.push_back(contains(ings, "chicken") || contains(ings, "egg") ? "fry and serve hot" : "bake and serve hot");
  return steps;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * double(n)); }
  double normal() {
    const double u1 = std::max(uniform(), 1e-300), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace toy

struct ToyFixture {
  std::vector<Recipe> recipes;
  std::vector<FeatureMatrix> features;  // parallel to recipes
  std::vector<std::vector<Segment>> proposals;
};

inline ToyFixture generate_toy_fixture(const ToyFixtureOptions& opt = {}) {
  if (opt.num_val + opt.num_test >= opt.num_recipes) throw Error("toy fixture: held-out split too large");
  toy::Rng rng(opt.seed);
  const auto& all = toy::ingredients();
  const auto& vocab = toy::words();

  // Ingredient sets: 2-4 ingredients with at least two that get prep steps.
  std::vector<std::vector<std::string>> sets;
  std::size_t guard = 0;
  while (sets.size() < opt.num_recipes) {
    if (++guard > 100000) throw Error("toy fixture: cannot draw enough distinct ingredient sets");
    const std::size_t k = 2 + rng.below(3);
    std::vector<bool> pick(all.size(), false);
    for (std::size_t n = 0; n < k;) {
      const std::size_t i = rng.below(all.size());
      if (!pick[i]) {
        pick[i] = true;
        ++n;
      }
    }
    std::vector<std::string> s;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (pick[i]) s.push_back(all[i]);
    }
    const std::size_t prep = s.size() - (toy::contains(s, "pepper") ? 1 : 0);
    if (prep < 2) continue;
    if (std::find(sets.begin(), sets.end(), s) != sets.end()) continue;
    sets.push_back(std::move(s));
  }

  std::vector<double> map(opt.feature_dim * vocab.size());
  for (auto& v : map) v = rng.normal() / std::sqrt(double(vocab.size()));

  ToyFixture fx;
  for (std::size_t r = 0; r < sets.size(); ++r) {
    Recipe rec;
    rec.id = (r + 1 < 10 ? "toy0" : "toy") + std::to_string(r + 1);
    rec.ingredients = sets[r];
    // Each preparation step is kept with probability 0.6, then forced on in
    // order until the recipe has at least 6 steps.
    const std::size_t prep_count = sets[r].size() - (toy::contains(sets[r], "pepper") ? 1 : 0);
    std::vector<bool> prep(prep_count);
    for (std::size_t i = 0; i < prep_count; ++i) prep[i] = rng.uniform() < 0.6;
    for (std::size_t i = 0; i < prep_count && toy::steps_for(sets[r], prep).size() < 6; ++i) prep[i] = true;
    rec.steps = toy::steps_for(sets[r], prep);
    const std::size_t held = opt.num_val + opt.num_test;
    const std::size_t first_held = opt.num_recipes - held;
    rec.split = r < first_held ? Split::kTrain : (r < first_held + opt.num_val ? Split::kVal : Split::kTest);

    // Segments of 20-60 frames separated by 0-15 frame gaps.
    std::vector<Segment> segs;
    std::size_t t = rng.below(16);
    for (std::size_t s = 0; s < rec.steps.size(); ++s) {
      const std::size_t len = 20 + rng.below(41);
      segs.push_back({t, t + len});
      t += len + rng.below(16);
    }
    const std::size_t frames = t;
    FeatureMatrix f(frames, opt.feature_dim);
    for (auto& x : f.data) x = static_cast<float>(opt.noise * rng.normal());
    for (std::size_t s = 0; s < segs.size(); ++s) {
      std::vector<double> counts(vocab.size(), 0.0);
      for (const auto& w : tokenize(rec.steps[s])) {
        auto it = std::find(vocab.begin(), vocab.end(), w);
        if (it != vocab.end()) counts[static_cast<std::size_t>(it - vocab.begin())] += 1;
      }
      std::vector<double> base(opt.feature_dim, 0.0);
      for (std::size_t d = 0; d < opt.feature_dim; ++d) {
        for (std::size_t w = 0; w < vocab.size(); ++w) base[d] += map[d * vocab.size() + w] * counts[w];
      }
      for (std::size_t fr = segs[s].start; fr < segs[s].end; ++fr) {
        for (std::size_t d = 0; d < opt.feature_dim; ++d) f.at(fr, d) += static_cast<float>(base[d]);
      }
    }

    // Proposals: jittered ground truth plus one spurious long span.
    std::vector<Segment> props;
    for (const auto& s : segs) {
      const std::size_t a = s.start + rng.below(6);
      const std::size_t b = std::min(frames, s.end + rng.below(6));
      props.push_back({a, std::max(b, a + 1)});
    }
    const std::size_t a = rng.below(frames / 2);
    props.push_back({a, std::min(frames, a + 80)});

    VideoManifest m;
    m.feature_file = std::filesystem::path("features") / (rec.id + ".pcf");
    m.num_frames = frames;
    m.feature_dim = opt.feature_dim;
    m.segments = segs;
    rec.video = m;
    fx.recipes.push_back(std::move(rec));
    fx.features.push_back(std::move(f));
    fx.proposals.push_back(std::move(props));
  }
  return fx;
}

// Toy network sizes and training settings.
inline nlohmann::json toy_config() {
  return {
      {"vocab", {{"max_words", 1000}}},
      {"model",
       {{"embed_dim", 32},
        {"encoder_hidden", 32},
        {"recipe_hidden", 64},
        {"decoder_hidden", 64},
        {"max_sentence_tokens", 60},
        {"frame_stride", 5}}},
      {"train",
       {{"text", {{"epochs", 150}, {"batch_size", 4}, {"lr", 0.005}, {"selection", "last"}}},
        {"video", {{"epochs", 25}, {"batch_size", 4}, {"lr", 0.005}, {"selection", "last"}}}}},
      {"anticipate", {{"window", 40}, {"horizons", 4}, {"decode", "greedy"}}},
  };
}

// Writes recipes.jsonl, features/<id>.pcf, proposals/<id>.json and
// config.json under `dir`.
inline void write_toy_fixture(const std::filesystem::path& dir, const ToyFixtureOptions& opt = {}) {
  const ToyFixture fx = generate_toy_fixture(opt);
  std::filesystem::create_directories(dir / "features");
  std::filesystem::create_directories(dir / "proposals");
  std::ofstream os(dir / "recipes.jsonl", std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + (dir / "recipes.jsonl").string());
  for (std::size_t i = 0; i < fx.recipes.size(); ++i) {
    const Recipe& r = fx.recipes[i];
    nlohmann::json j;
    j["id"] = r.id;
    j["ingredients"] = r.ingredients;
    j["steps"] = r.steps;
    j["split"] = to_string(r.split);
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : r.video->segments) segs.push_back({s.start, s.end});
    j["video"] = {{"feature_file", r.video->feature_file.generic_string()},
                  {"num_frames", r.video->num_frames},
                  {"feature_dim", r.video->feature_dim},
                  {"segments", segs}};
    os << j.dump() << '\n';
    write_features(dir / r.video->feature_file, fx.features[i]);
    nlohmann::json props = nlohmann::json::array();
    for (const auto& p : fx.proposals[i]) props.push_back({p.start, p.end});
    std::ofstream ps(dir / "proposals" / (r.id + ".json"), std::ios::binary | std::ios::trunc);
    ps << props.dump() << '\n';
  }
  std::ofstream cs(dir / "config.json", std::ios::binary | std::ios::trunc);
  cs << toy_config().dump(2) << '\n';
}

}  // namespace procap::corpus
