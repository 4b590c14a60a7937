#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "procap/corpus/tokenizer.hpp"
#include "procap/error.hpp"
#include "procap/metrics/stemmer.hpp"

namespace procap::metrics {

using Tokens = std::vector<std::string>;

// Both sentence scores ignore punctuation-only tokens, as the usual
// caption-evaluation tokenizer strips them before scoring.
inline Tokens content_tokens(const Tokens& tokens) {
  Tokens out;
  for (const auto& t : tokens) {
    if (!corpus::is_punctuation_token(t)) out.push_back(t);
  }
  return out;
}

namespace detail {

inline std::map<Tokens, int> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<Tokens, int> counts;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++counts[Tokens(t.begin() + i, t.begin() + i + n)];
  return counts;
}

}  // namespace detail

// Sentence-level BLEU-n in [0, 100]. Clipped n-gram precisions are combined
// by geometric mean over orders 1..min(n, |pred|). The i-th order (>= 2)
// without any clipped match gets precision 1 / (2^i * count) instead of 0,
// which never exceeds the unigram precision. Brevity penalty
// exp(1 - |ref| / |pred|) applies when the prediction is shorter.
inline double bleu_n(const Tokens& pred_raw, const Tokens& ref_raw, std::size_t n) {
  if (n < 1 || n > 4) throw Error("bleu_n: order must be in 1..4, got " + std::to_string(n));
  const Tokens pred = content_tokens(pred_raw);
  const Tokens ref = content_tokens(ref_raw);
  if (pred.empty() || ref.empty()) return 0.0;
  const std::size_t orders = std::min(n, pred.size());
  double log_sum = 0;
  double decay = 1.0;
  for (std::size_t k = 1; k <= orders; ++k) {
    const auto pc = detail::ngram_counts(pred, k);
    const auto rc = detail::ngram_counts(ref, k);
    int matched = 0, total = 0;
    for (const auto& [gram, c] : pc) {
      total += c;
      auto it = rc.find(gram);
      if (it != rc.end()) matched += std::min(c, it->second);
    }
    double p;
    if (matched > 0) {
      p = double(matched) / double(total);
    } else if (k == 1) {
      return 0.0;
    } else {
      decay *= 2.0;
      p = 1.0 / (decay * double(total));
    }
    log_sum += std::log(p);
  }
  const double bp = pred.size() < ref.size() ? std::exp(1.0 - double(ref.size()) / double(pred.size())) : 1.0;
  return 100.0 * bp * std::exp(log_sum / double(orders));
}

struct MeteorStats {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0;
  double recall = 0;
  double fmean = 0;
  double penalty = 0;
  double score = 0;
};

// Exact-then-stem unigram alignment with the (0.9, 3, 0.5) parameter set.
// A prediction that aligns completely and contiguously with a reference of
// the same length gets no fragmentation penalty, so identical sentences
// score 100.
inline MeteorStats meteor_lite_stats(const Tokens& pred_raw, const Tokens& ref_raw) {
  const Tokens pred = content_tokens(pred_raw);
  const Tokens ref = content_tokens(ref_raw);
  MeteorStats s;
  if (pred.empty() || ref.empty()) return s;

  std::vector<int> align(pred.size(), -1);
  std::vector<bool> used(ref.size(), false);
  auto pass = [&](const Tokens& p, const Tokens& r) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (align[i] >= 0) continue;
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (!used[j] && p[i] == r[j]) {
          align[i] = static_cast<int>(j);
          used[j] = true;
          break;
        }
      }
    }
  };
  pass(pred, ref);
  PorterStemmer stemmer;
  Tokens pred_stems, ref_stems;
  for (const auto& t : pred) pred_stems.push_back(stemmer.stem(t));
  for (const auto& t : ref) ref_stems.push_back(stemmer.stem(t));
  pass(pred_stems, ref_stems);

  int prev = -2;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (align[i] < 0) {
      prev = -2;
      continue;
    }
    ++s.matches;
    if (align[i] != prev + 1 || prev < 0) ++s.chunks;
    prev = align[i];
  }
  if (s.matches == 0) return s;
  s.precision = double(s.matches) / double(pred.size());
  s.recall = double(s.matches) / double(ref.size());
  s.fmean = s.precision * s.recall / (0.9 * s.precision + 0.1 * s.recall);
  const bool perfect = s.chunks == 1 && s.matches == pred.size() && s.matches == ref.size();
  s.penalty = perfect ? 0.0 : 0.5 * std::pow(double(s.chunks) / double(s.matches), 3.0);
  s.score = 100.0 * s.fmean * (1.0 - s.penalty);
  return s;
}

inline double meteor_lite(const Tokens& pred, const Tokens& ref) { return meteor_lite_stats(pred, ref).score; }

}  // namespace procap::metrics
