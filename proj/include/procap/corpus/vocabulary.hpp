#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "procap/corpus/recipe.hpp"
#include "procap/corpus/tokenizer.hpp"
#include "procap/error.hpp"

namespace procap::corpus {

using TokenId = int;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumReserved = 4;

// Word vocabulary with four reserved control tokens at ids 0..3.
class Vocabulary {
 public:
  Vocabulary() : id_to_word_{"<pad>", "<bos>", "<eos>", "<unk>"} {}

  // `words` are the non-reserved entries in id order (first gets id 4).
  explicit Vocabulary(const std::vector<std::string>& words) : Vocabulary() {
    for (const auto& w : words) {
      if (word_to_id_.count(w) != 0 || is_reserved_name(w)) {
        throw DataError("duplicate or reserved vocabulary entry '" + w + "'");
      }
      word_to_id_.emplace(w, static_cast<TokenId>(id_to_word_.size()));
      id_to_word_.push_back(w);
    }
  }

  std::size_t size() const { return id_to_word_.size(); }

  TokenId id(const std::string& word) const {
    auto it = word_to_id_.find(word);
    return it == word_to_id_.end() ? kUnk : it->second;
  }
  bool contains(const std::string& word) const { return word_to_id_.count(word) != 0; }
  const std::string& word(TokenId id) const { return id_to_word_.at(static_cast<std::size_t>(id)); }

  // Non-reserved entries in id order.
  std::vector<std::string> words() const {
    return {id_to_word_.begin() + kNumReserved, id_to_word_.end()};
  }

  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
  }

  std::vector<std::string> decode(const std::vector<TokenId>& ids) const {
    std::vector<std::string> out;
    for (TokenId i : ids) out.push_back(word(i));
    return out;
  }

  std::string serialize() const {
    std::ostringstream os;
    os << "# procap word vocabulary v1\n"
       << "# reserved ids: 0=<pad> 1=<bos> 2=<eos> 3=<unk>\n"
       << "# the k-th token line (k starting at 0) has id k + 4\n";
    for (std::size_t i = kNumReserved; i < id_to_word_.size(); ++i) os << id_to_word_[i] << '\n';
    return os.str();
  }

  static Vocabulary parse(std::istream& is) {
    std::vector<std::string> words;
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      words.push_back(line);
    }
    return Vocabulary(words);
  }

  bool operator==(const Vocabulary& o) const { return id_to_word_ == o.id_to_word_; }

 private:
  static bool is_reserved_name(const std::string& w) {
    return w == "<pad>" || w == "<bos>" || w == "<eos>" || w == "<unk>";
  }

  std::unordered_map<std::string, TokenId> word_to_id_;
  std::vector<std::string> id_to_word_;
};

// Ingredient entries (possibly multiword) with no reserved ids; index i of
// the multi-hot vector corresponds to entry i.
class IngredientVocabulary {
 public:
  IngredientVocabulary() = default;
  explicit IngredientVocabulary(std::vector<std::string> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!index_.emplace(entries_[i], i).second) {
        throw DataError("duplicate ingredient entry '" + entries_[i] + "'");
      }
    }
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::string>& entries() const { return entries_; }
  const std::string& entry(std::size_t i) const { return entries_.at(i); }

  std::optional<std::size_t> index(const std::string& normalized) const {
    auto it = index_.find(normalized);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::string serialize() const {
    std::ostringstream os;
    os << "# procap ingredient vocabulary v1\n"
       << "# no reserved ids; the k-th entry line (k starting at 0) has index k\n";
    for (const auto& e : entries_) os << e << '\n';
    return os.str();
  }

  static IngredientVocabulary parse(std::istream& is) {
    std::vector<std::string> entries;
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      entries.push_back(line);
    }
    return IngredientVocabulary(std::move(entries));
  }

  bool operator==(const IngredientVocabulary& o) const { return entries_ == o.entries_; }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

// Descending count, then lexicographic.
inline std::vector<std::string> rank_by_frequency(const std::map<std::string, std::size_t>& counts,
                                                  std::size_t limit) {
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < items.size() && i < limit; ++i) out.push_back(items[i].first);
  return out;
}

}  // namespace detail

// Keeps the `max_size - 4` most frequent tokens of the training-split steps.
inline Vocabulary build_vocabulary(const std::vector<Recipe>& recipes, std::size_t max_size) {
  if (max_size < kNumReserved + 1) {
    throw DataError("vocabulary max_size must be at least 5, got " + std::to_string(max_size));
  }
  std::map<std::string, std::size_t> counts;
  bool any_train = false;
  for (const auto& r : recipes) {
    if (r.split != Split::kTrain) continue;
    any_train = true;
    for (const auto& s : r.steps) {
      for (auto& t : tokenize(s)) ++counts[std::move(t)];
    }
  }
  if (!any_train) throw DataError("cannot build vocabulary: corpus has no training recipes");
  return Vocabulary(detail::rank_by_frequency(counts, max_size - kNumReserved));
}

// Ingredient vocabulary over the training split; `max_size` 0 keeps all.
inline IngredientVocabulary build_ingredient_vocabulary(const std::vector<Recipe>& recipes,
                                                        std::size_t max_size = 0) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : recipes) {
    if (r.split != Split::kTrain) continue;
    for (const auto& ing : r.ingredients) ++counts[ing];
  }
  const std::size_t limit = max_size == 0 ? counts.size() : max_size;
  return IngredientVocabulary(detail::rank_by_frequency(counts, limit));
}

struct IngredientCoverage {
  std::size_t known = 0;
  std::size_t unknown = 0;
};

// Multi-hot vector over `iv`; unknown ingredients are ignored and counted.
inline std::vector<float> encode_ingredients(const Recipe& r, const IngredientVocabulary& iv,
                                             IngredientCoverage* coverage = nullptr) {
  std::vector<float> v(iv.size(), 0.0f);
  for (const auto& ing : r.ingredients) {
    if (auto idx = iv.index(ing)) {
      v[*idx] = 1.0f;
      if (coverage) ++coverage->known;
    } else if (coverage) {
      ++coverage->unknown;
    }
  }
  return v;
}

template <class V>
void save_text(const std::filesystem::path& path, const V& vocab) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << vocab.serialize();
}

template <class V>
V load_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  return V::parse(is);
}

}  // namespace procap::corpus
