#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "procap/autodiff/lstm.hpp"
#include "procap/corpus/vocabulary.hpp"
#include "procap/model/encoders.hpp"
#include "procap/model/model.hpp"

namespace procap::model {

using corpus::TokenId;

template <class T>
struct DecoderStep {
  ad::LstmState<T> state;
  ad::Tensor<T> log_probs;  // log-softmax over the full vocabulary
};

// One decoder step: input is [embedding(prev); r].
template <class T>
DecoderStep<T> decoder_step(const ad::LstmState<T>& state, TokenId prev, const ad::Tensor<T>& r,
                            const Model<T>& m) {
  ad::Graph<T>& g = *r.graph();
  auto emb = ad::embedding_lookup(g.param(m.embedding()), static_cast<std::size_t>(prev));
  auto next = ad::lstm_cell(ad::concat<T>({emb, r}), state, m.decoder_lstm());
  auto logits = ad::add(ad::matmul(g.param(m.output_w()), next.h), g.param(m.output_b()));
  return {next, ad::log_softmax(logits)};
}

// Sum over t of -log P(target_t | target_<t, r) with teacher forcing. The
// caller appends EOS when the stop decision should be trained. Trailing PAD
// entries are ignored; PAD anywhere else is an error.
template <class T>
ad::Tensor<T> teacher_forced_nll(const StepRepr<T>& r, std::span<const TokenId> target, const Model<T>& m) {
  std::size_t len = target.size();
  while (len > 0 && target[len - 1] == corpus::kPad) --len;
  if (len == 0) throw Error("teacher_forced_nll: empty target");
  for (std::size_t t = 0; t < len; ++t) {
    if (target[t] == corpus::kPad) throw Error("teacher_forced_nll: PAD inside target");
  }
  ad::Graph<T>& g = *r.vector.graph();
  auto state = ad::lstm_zero_state(g, m.config().decoder_hidden);
  TokenId prev = corpus::kBos;
  std::vector<ad::Tensor<T>> terms;
  terms.reserve(len);
  for (std::size_t t = 0; t < len; ++t) {
    auto step = decoder_step(state, prev, r.vector, m);
    terms.push_back(ad::pick(step.log_probs, static_cast<std::size_t>(target[t])));
    state = step.state;
    prev = target[t];
  }
  return ad::scale(ad::sum(ad::concat(terms)), T(-1));
}

struct Hypothesis {
  std::vector<TokenId> tokens;  // includes the final EOS when finished
  double logprob = 0;
  bool finished = false;

  // Word tokens without the terminating EOS.
  std::vector<TokenId> words() const {
    std::vector<TokenId> w = tokens;
    if (!w.empty() && w.back() == corpus::kEos) w.pop_back();
    return w;
  }
};

// Tokens the decoder may emit: everything except PAD, BOS and UNK.
inline bool emittable(TokenId id) {
  return id != corpus::kPad && id != corpus::kBos && id != corpus::kUnk;
}

namespace detail {

// Highest-scoring emittable token; ties go to the lowest id.
inline TokenId best_emittable(const std::vector<double>& logp) {
  TokenId best = -1;
  for (std::size_t i = 0; i < logp.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    if (!emittable(id)) continue;
    if (best < 0 || logp[i] > logp[static_cast<std::size_t>(best)]) best = id;
  }
  return best;
}

template <class T>
std::vector<double> to_double(const ad::Tensor<T>& t) {
  return {t.value().begin(), t.value().end()};
}

}  // namespace detail

// Greedy decoding: at most `max_len` emissions (EOS counts as one).
template <class T>
Hypothesis decode_greedy(std::span<const T> r_values, const Model<T>& m, std::size_t max_len = 30) {
  ad::Graph<T> g;
  auto r = g.constant({r_values.size()}, std::vector<T>(r_values.begin(), r_values.end()));
  auto state = ad::lstm_zero_state(g, m.config().decoder_hidden);
  Hypothesis hyp;
  TokenId prev = corpus::kBos;
  for (std::size_t t = 0; t < max_len; ++t) {
    auto step = decoder_step(state, prev, r, m);
    const auto logp = detail::to_double(step.log_probs);
    const TokenId tok = detail::best_emittable(logp);
    hyp.tokens.push_back(tok);
    hyp.logprob += logp[static_cast<std::size_t>(tok)];
    if (tok == corpus::kEos) {
      hyp.finished = true;
      break;
    }
    state = step.state;
    prev = tok;
  }
  return hyp;
}

// Beam search ranked by unnormalized log-likelihood. Finished hypotheses
// occupy beam slots, so k = 1 reproduces greedy decoding. The greedy lineage
// is never pruned, which makes the returned log-probability at least the
// greedy one. Hypotheses cut off at max_len compete with finished ones.
template <class T>
Hypothesis decode_beam(std::span<const T> r_values, const Model<T>& m, std::size_t k = 5,
                       std::size_t max_len = 30) {
  if (k == 0) throw Error("decode_beam: beam size must be at least 1");
  ad::Graph<T> g;
  auto r = g.constant({r_values.size()}, std::vector<T>(r_values.begin(), r_values.end()));

  struct Live {
    Hypothesis hyp;
    ad::LstmState<T> state;
    bool greedy = true;
  };
  struct Candidate {
    std::size_t parent;
    TokenId token;
    double logprob;
    double step_logprob;
    bool greedy;
  };

  std::vector<Live> alive{{Hypothesis{}, ad::lstm_zero_state(g, m.config().decoder_hidden), true}};
  std::vector<Hypothesis> done;
  for (std::size_t t = 0; t < max_len && !alive.empty(); ++t) {
    std::vector<Candidate> cands;
    std::vector<ad::LstmState<T>> next_states;
    for (std::size_t p = 0; p < alive.size(); ++p) {
      const Live& live = alive[p];
      const TokenId prev = live.hyp.tokens.empty() ? corpus::kBos : live.hyp.tokens.back();
      auto step = decoder_step(live.state, prev, r, m);
      next_states.push_back(step.state);
      const auto logp = detail::to_double(step.log_probs);
      const TokenId greedy_tok = detail::best_emittable(logp);
      for (std::size_t i = 0; i < logp.size(); ++i) {
        const auto id = static_cast<TokenId>(i);
        if (!emittable(id)) continue;
        cands.push_back({p, id, live.hyp.logprob + logp[i], logp[i], live.greedy && id == greedy_tok});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      if (a.parent != b.parent) return a.parent < b.parent;
      if (a.step_logprob != b.step_logprob) return a.step_logprob > b.step_logprob;
      return a.token < b.token;
    });
    std::vector<Candidate> chosen(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(
                                                                    std::min(k, cands.size())));
    const bool has_greedy =
        std::any_of(chosen.begin(), chosen.end(), [](const Candidate& c) { return c.greedy; });
    if (!has_greedy) {
      auto it = std::find_if(cands.begin(), cands.end(), [](const Candidate& c) { return c.greedy; });
      if (it != cands.end()) chosen.back() = *it;
    }
    std::vector<Live> next;
    for (const Candidate& c : chosen) {
      Live child{alive[c.parent].hyp, next_states[c.parent], c.greedy};
      child.hyp.tokens.push_back(c.token);
      child.hyp.logprob = c.logprob;
      if (c.token == corpus::kEos) {
        child.hyp.finished = true;
        done.push_back(std::move(child.hyp));
      } else {
        next.push_back(std::move(child));
      }
    }
    alive = std::move(next);
  }
  for (auto& live : alive) done.push_back(std::move(live.hyp));  // cut off at max_len
  auto best = std::max_element(done.begin(), done.end(), [](const Hypothesis& a, const Hypothesis& b) {
    return a.logprob < b.logprob;
  });
  return *best;
}

}  // namespace procap::model
