#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "procap/corpus/features.hpp"
#include "procap/corpus/tokenizer.hpp"
#include "procap/error.hpp"
#include "procap/log.hpp"

namespace procap::corpus {

enum class Split { kTrain, kVal, kTest };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline std::optional<Split> parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  return std::nullopt;
}

// Half-open frame interval [start, end).
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool operator==(const Segment&) const = default;
};

struct VideoManifest {
  std::filesystem::path feature_file;  // resolved against the corpus directory
  std::size_t num_frames = 0;
  std::size_t feature_dim = 0;
  std::vector<Segment> segments;  // one per step when used for grounding
};

struct Recipe {
  std::string id;
  std::vector<std::string> ingredients;  // normalized, de-duplicated, input order
  std::vector<std::string> steps;
  Split split = Split::kTrain;
  std::optional<VideoManifest> video;

  std::size_t num_steps() const { return steps.size(); }
};

// Validates the manifest's own invariants; returns an error message or "".
inline std::string check_manifest(const VideoManifest& m) {
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < m.segments.size(); ++i) {
    const Segment& s = m.segments[i];
    if (s.start >= s.end) return "segment " + std::to_string(i) + " is empty or reversed";
    if (s.end > m.num_frames) return "segment " + std::to_string(i) + " exceeds num_frames";
    if (i > 0 && s.start < prev_end) {
      return "segment " + std::to_string(i) + " overlaps or is out of order";
    }
    prev_end = s.end;
  }
  return {};
}

namespace detail {

inline Recipe recipe_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  Recipe r;
  r.id = j.at("id").get<std::string>();
  for (const auto& ing : j.at("ingredients")) {
    std::string norm = normalize_ingredient(ing.get<std::string>());
    if (norm.empty()) continue;
    bool seen = false;
    for (const auto& e : r.ingredients) seen = seen || e == norm;
    if (!seen) r.ingredients.push_back(std::move(norm));
  }
  r.steps = j.at("steps").get<std::vector<std::string>>();
  const auto split = parse_split(j.at("split").get<std::string>());
  if (!split) throw DataError("unknown split '" + j.at("split").get<std::string>() + "'");
  r.split = *split;
  if (j.contains("video") && !j.at("video").is_null()) {
    const auto& v = j.at("video");
    VideoManifest m;
    std::filesystem::path f = v.at("feature_file").get<std::string>();
    m.feature_file = f.is_absolute() ? f : base_dir / f;
    m.num_frames = v.at("num_frames").get<std::size_t>();
    m.feature_dim = v.at("feature_dim").get<std::size_t>();
    for (const auto& seg : v.at("segments")) {
      if (!seg.is_array() || seg.size() != 2) throw DataError("segment must be [start, end]");
      m.segments.push_back({seg[0].get<std::size_t>(), seg[1].get<std::size_t>()});
    }
    r.video = std::move(m);
  }
  return r;
}

}  // namespace detail

// Returns the reason a recipe violates its invariants, or "" when valid.
inline std::string check_recipe(const Recipe& r) {
  if (r.id.empty()) return "empty id";
  if (r.steps.empty()) return "recipe has no steps";
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    if (tokenize(r.steps[i]).empty()) return "step " + std::to_string(i) + " is empty";
  }
  if (r.video) {
    std::string err = check_manifest(*r.video);
    if (!err.empty()) return "video manifest: " + err;
  }
  return {};
}

// Loads a JSON-lines recipe corpus. Malformed lines and recipes that violate
// invariants are skipped with a warning naming the line number.
inline std::vector<Recipe> load_corpus(const std::filesystem::path& path,
                                       Diagnostics* diag = nullptr) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read corpus file: " + path.string());
  const auto base_dir = path.parent_path();
  std::vector<Recipe> recipes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    Recipe r;
    try {
      r = detail::recipe_from_json(nlohmann::json::parse(line), base_dir);
    } catch (const std::exception& e) {
      warn(diag, where + ": malformed recipe: " + e.what());
      continue;
    }
    if (std::string err = check_recipe(r); !err.empty()) {
      warn(diag, where + ": skipping recipe '" + r.id + "': " + err);
      continue;
    }
    recipes.push_back(std::move(r));
  }
  return recipes;
}

inline nlohmann::json recipe_to_json(const Recipe& r, const std::filesystem::path& base_dir = {}) {
  nlohmann::json j;
  j["id"] = r.id;
  j["ingredients"] = r.ingredients;
  j["steps"] = r.steps;
  j["split"] = to_string(r.split);
  if (r.video) {
    nlohmann::json v;
    auto f = r.video->feature_file;
    if (!base_dir.empty()) f = f.lexically_relative(base_dir);
    v["feature_file"] = f.generic_string();
    v["num_frames"] = r.video->num_frames;
    v["feature_dim"] = r.video->feature_dim;
    auto segs = nlohmann::json::array();
    for (const auto& s : r.video->segments) segs.push_back({s.start, s.end});
    v["segments"] = segs;
    j["video"] = v;
  }
  return j;
}

// Loads the frame features of a manifest, checking the declared shape.
inline FeatureMatrix load_features(const VideoManifest& m) {
  FeatureMatrix f = read_features(m.feature_file);
  if (f.rows != m.num_frames || f.cols != m.feature_dim) {
    throw DataError("feature file " + m.feature_file.string() + " has shape " +
                    detail::shape_str(f.rows, f.cols) + " but manifest declares " +
                    detail::shape_str(m.num_frames, m.feature_dim));
  }
  return f;
}

inline std::vector<const Recipe*> select_split(const std::vector<Recipe>& recipes, Split s) {
  std::vector<const Recipe*> out;
  for (const auto& r : recipes) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

}  // namespace procap::corpus
