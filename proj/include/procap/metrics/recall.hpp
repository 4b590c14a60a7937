#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "procap/corpus/tokenizer.hpp"
#include "procap/corpus/vocabulary.hpp"
#include "procap/error.hpp"
#include "procap/metrics/sentence.hpp"
#include "procap/metrics/stemmer.hpp"

namespace procap::metrics {

struct RecallCount {
  std::size_t hits = 0;
  std::size_t total = 0;

  RecallCount& operator+=(const RecallCount& o) {
    hits += o.hits;
    total += o.total;
    return *this;
  }
  bool operator==(const RecallCount&) const = default;
};

// Matches ingredient-vocabulary entries as contiguous token runs, longest
// entry first, without reusing tokens.
class IngredientMatcher {
 public:
  explicit IngredientMatcher(const corpus::IngredientVocabulary& iv) {
    for (std::size_t i = 0; i < iv.size(); ++i) {
      auto toks = corpus::tokenize(iv.entry(i));
      if (toks.empty()) continue;
      max_len_ = std::max(max_len_, toks.size());
      entries_.emplace(corpus::join(toks), i);
    }
  }

  std::set<std::size_t> mentions(const Tokens& tokens) const {
    std::set<std::size_t> found;
    std::size_t i = 0;
    while (i < tokens.size()) {
      std::size_t advance = 1;
      for (std::size_t len = std::min(max_len_, tokens.size() - i); len >= 1; --len) {
        const Tokens span(tokens.begin() + i, tokens.begin() + i + len);
        auto it = entries_.find(corpus::join(span));
        if (it != entries_.end()) {
          found.insert(it->second);
          advance = len;
          break;
        }
      }
      i += advance;
    }
    return found;
  }

 private:
  std::unordered_map<std::string, std::size_t> entries_;
  std::size_t max_len_ = 0;
};

inline RecallCount ingredient_recall(const Tokens& pred, const Tokens& ref, const IngredientMatcher& m) {
  const auto want = m.mentions(ref);
  const auto got = m.mentions(pred);
  RecallCount c;
  c.total = want.size();
  for (std::size_t i : want) c.hits += got.count(i);
  return c;
}

inline RecallCount ingredient_recall(const Tokens& pred, const Tokens& ref,
                                     const corpus::IngredientVocabulary& iv) {
  return ingredient_recall(pred, ref, IngredientMatcher(iv));
}

// Verb lemmas and their Porter stems. Lemmas whose stems collide are
// rejected.
class VerbLexicon {
 public:
  VerbLexicon() = default;
  explicit VerbLexicon(std::vector<std::string> lemmas) : lemmas_(std::move(lemmas)) {
    PorterStemmer s;
    for (std::size_t i = 0; i < lemmas_.size(); ++i) {
      std::string st = s.stem(lemmas_[i]);
      auto [it, inserted] = by_stem_.emplace(st, i);
      if (!inserted) {
        throw DataError("verb lexicon: '" + lemmas_[i] + "' and '" + lemmas_[it->second] +
                        "' share the stem '" + st + "'");
      }
      stems_.push_back(std::move(st));
    }
  }

  static VerbLexicon load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read verb lexicon: " + path.string());
    std::vector<std::string> lemmas;
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      lemmas.push_back(line);
    }
    return VerbLexicon(std::move(lemmas));
  }

  std::size_t size() const { return lemmas_.size(); }
  const std::vector<std::string>& lemmas() const { return lemmas_; }
  const std::vector<std::string>& stems() const { return stems_; }

  // Indices of distinct lexicon verbs among `tokens`.
  std::set<std::size_t> verbs_in(const Tokens& tokens) const {
    PorterStemmer s;
    std::set<std::size_t> out;
    for (const auto& t : tokens) {
      auto it = by_stem_.find(s.stem(t));
      if (it != by_stem_.end()) out.insert(it->second);
    }
    return out;
  }

 private:
  std::vector<std::string> lemmas_;
  std::vector<std::string> stems_;
  std::unordered_map<std::string, std::size_t> by_stem_;
};

inline RecallCount verb_recall(const Tokens& pred, const Tokens& ref, const VerbLexicon& lex) {
  const auto want = lex.verbs_in(ref);
  const auto got = lex.verbs_in(pred);
  RecallCount c;
  c.total = want.size();
  for (std::size_t i : want) c.hits += got.count(i);
  return c;
}

}  // namespace procap::metrics
