#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "procap/corpus/recipe.hpp"
#include "procap/corpus/tokenizer.hpp"
#include "procap/error.hpp"
#include "procap/inference/trace.hpp"
#include "procap/metrics/recall.hpp"
#include "procap/metrics/sentence.hpp"

namespace procap::metrics {

enum class MatchMode { kExact, kFuture };

inline const char* to_string(MatchMode m) { return m == MatchMode::kExact ? "exact" : "future"; }

inline MatchMode parse_match_mode(const std::string& s) {
  if (s == "exact") return MatchMode::kExact;
  if (s == "future") return MatchMode::kFuture;
  throw Error("unknown evaluation mode '" + s + "' (expected exact or future)");
}

struct SentenceScores {
  double bleu1 = 0;
  double bleu4 = 0;
  double meteor = 0;
  RecallCount ingredients;
  RecallCount verbs;
};

struct Scorer {
  IngredientMatcher ingredients;
  const VerbLexicon* lexicon;

  Scorer(const corpus::IngredientVocabulary& iv, const VerbLexicon& lex) : ingredients(iv), lexicon(&lex) {}

  SentenceScores score(const Tokens& pred, const Tokens& ref) const {
    SentenceScores s;
    s.bleu1 = bleu_n(pred, ref, 1);
    s.bleu4 = bleu_n(pred, ref, 4);
    s.meteor = meteor_lite(pred, ref);
    s.ingredients = ingredient_recall(pred, ref, ingredients);
    s.verbs = verb_recall(pred, ref, *lexicon);
    return s;
  }
};

// Running sums for one (step index, horizon) cell or any coarser group.
struct Cell {
  std::size_t step_index = 0;
  std::size_t horizon = 0;
  std::size_t support = 0;
  double bleu1_sum = 0;
  double bleu4_sum = 0;
  double meteor_sum = 0;
  RecallCount ingredients;
  RecallCount verbs;

  void add(const SentenceScores& s) {
    ++support;
    bleu1_sum += s.bleu1;
    bleu4_sum += s.bleu4;
    meteor_sum += s.meteor;
    ingredients += s.ingredients;
    verbs += s.verbs;
  }

  double bleu1() const { return support ? bleu1_sum / double(support) : 0.0; }
  double bleu4() const { return support ? bleu4_sum / double(support) : 0.0; }
  double meteor() const { return support ? meteor_sum / double(support) : 0.0; }
  std::optional<double> ingredient_recall() const {
    if (ingredients.total == 0) return std::nullopt;
    return double(ingredients.hits) / double(ingredients.total);
  }
  std::optional<double> verb_recall() const {
    if (verbs.total == 0) return std::nullopt;
    return double(verbs.hits) / double(verbs.total);
  }
};

struct MetricReport {
  MatchMode mode = MatchMode::kExact;
  std::vector<Cell> cells;  // sorted by (step_index, horizon)
  std::vector<Cell> horizons;  // all step indices pooled, one per horizon
  Cell overall;

  const Cell* find(std::size_t step_index, std::size_t horizon) const {
    for (const auto& c : cells) {
      if (c.step_index == step_index && c.horizon == horizon) return &c;
    }
    return nullptr;
  }
  const Cell* find_horizon(std::size_t horizon) const {
    for (const auto& c : horizons) {
      if (c.horizon == horizon) return &c;
    }
    return nullptr;
  }
};

namespace detail {

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json cell_json(const Cell& c) {
  return {{"step_index", c.step_index},
          {"horizon", c.horizon},
          {"support", c.support},
          {"bleu1", c.bleu1()},
          {"bleu4", c.bleu4()},
          {"meteor", c.meteor()},
          {"ingredient_recall", optional_json(c.ingredient_recall())},
          {"ingredient_hits", c.ingredients.hits},
          {"ingredient_total", c.ingredients.total},
          {"verb_recall", optional_json(c.verb_recall())},
          {"verb_hits", c.verbs.hits},
          {"verb_total", c.verbs.total}};
}

inline std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string fixed(const std::optional<double>& v) { return v ? fixed(*v) : std::string(); }

}  // namespace detail

inline nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json j;
  j["mode"] = to_string(r.mode);
  j["cells"] = nlohmann::json::array();
  for (const auto& c : r.cells) j["cells"].push_back(detail::cell_json(c));
  j["horizons"] = nlohmann::json::array();
  for (const auto& c : r.horizons) {
    auto cj = detail::cell_json(c);
    cj.erase("step_index");
    j["horizons"].push_back(cj);
  }
  auto all = detail::cell_json(r.overall);
  all.erase("step_index");
  all.erase("horizon");
  j["overall"] = all;
  return j;
}

// One row per (step_index, horizon) cell.
inline std::string report_to_csv(const MetricReport& r) {
  std::ostringstream os;
  os << "step_index,horizon,support,bleu1,bleu4,meteor,ingredient_recall,ingredient_total,verb_recall,"
        "verb_total\n";
  for (const auto& c : r.cells) {
    os << c.step_index << ',' << c.horizon << ',' << c.support << ',' << detail::fixed(c.bleu1()) << ','
       << detail::fixed(c.bleu4()) << ',' << detail::fixed(c.meteor()) << ','
       << detail::fixed(c.ingredient_recall()) << ',' << c.ingredients.total << ','
       << detail::fixed(c.verb_recall()) << ',' << c.verbs.total << '\n';
  }
  return os.str();
}

// Scores every prediction against its aligned ground-truth step. In future
// mode each sentence score is the best over GT steps target..target+3; the
// recalls stay aligned to the exact target step.
inline MetricReport aggregate(const std::vector<infer::PredictionTrace>& traces,
                              const std::vector<corpus::Recipe>& gt, const Scorer& scorer,
                              MatchMode mode = MatchMode::kExact, std::size_t future_window = 3) {
  std::unordered_map<std::string, const corpus::Recipe*> by_id;
  for (const auto& r : gt) by_id.emplace(r.id, &r);

  std::map<std::pair<std::size_t, std::size_t>, Cell> cells;
  std::map<std::size_t, Cell> horizons;
  MetricReport report;
  report.mode = mode;
  for (const auto& trace : traces) {
    auto it = by_id.find(trace.recipe_id);
    if (it == by_id.end()) throw DataError("evaluate: no ground-truth recipe with id '" + trace.recipe_id + "'");
    const corpus::Recipe& recipe = *it->second;
    std::vector<Tokens> refs;
    for (const auto& s : recipe.steps) refs.push_back(corpus::tokenize(s));
    for (const auto& row : trace.rows) {
      for (const auto& p : row.predictions) {
        if (p.target_step == 0 || p.target_step > refs.size()) {
          throw DataError("evaluate: recipe '" + recipe.id + "' has " + std::to_string(refs.size()) +
                          " steps but a prediction targets step " + std::to_string(p.target_step));
        }
        SentenceScores s = scorer.score(p.words, refs[p.target_step - 1]);
        if (mode == MatchMode::kFuture) {
          const std::size_t last = std::min(refs.size(), p.target_step + future_window);
          for (std::size_t t = p.target_step + 1; t <= last; ++t) {
            const Tokens& ref = refs[t - 1];
            s.bleu1 = std::max(s.bleu1, bleu_n(p.words, ref, 1));
            s.bleu4 = std::max(s.bleu4, bleu_n(p.words, ref, 4));
            s.meteor = std::max(s.meteor, meteor_lite(p.words, ref));
          }
        }
        Cell& c = cells[{row.observed, p.horizon}];
        c.step_index = row.observed;
        c.horizon = p.horizon;
        c.add(s);
        Cell& h = horizons[p.horizon];
        h.horizon = p.horizon;
        h.add(s);
        report.overall.add(s);
      }
    }
  }
  for (auto& [key, c] : cells) report.cells.push_back(c);
  for (auto& [key, c] : horizons) report.horizons.push_back(c);
  return report;
}

// Mean number of distinct lexicon verbs per step over the given recipes.
inline double verbs_per_step(const std::vector<corpus::Recipe>& recipes, const VerbLexicon& lex) {
  std::size_t steps = 0, verbs = 0;
  for (const auto& r : recipes) {
    for (const auto& s : r.steps) {
      ++steps;
      verbs += lex.verbs_in(corpus::tokenize(s)).size();
    }
  }
  return steps ? double(verbs) / double(steps) : 0.0;
}

}  // namespace procap::metrics
