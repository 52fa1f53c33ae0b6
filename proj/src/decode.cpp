#include "trice/decode.hpp"

#include <algorithm>
#include <cmath>

namespace trice {

real length_penalty(int n, real alpha) {
  return static_cast<real>(
      std::pow((5.0 + static_cast<double>(n)) / 6.0,
               static_cast<double>(alpha)));
}

real hypothesis_score(const Hypothesis& h, real alpha) {
  const int n = std::max<int>(1, static_cast<int>(h.tokens.size()));
  return h.logp / length_penalty(n, alpha);
}

bool hypothesis_better(const Hypothesis& a, const Hypothesis& b, real alpha) {
  const real sa = hypothesis_score(a, alpha);
  const real sb = hypothesis_score(b, alpha);
  if (sa != sb) return sa > sb;
  if (a.tokens != b.tokens)
    return std::lexicographical_compare(a.tokens.begin(), a.tokens.end(),
                                        b.tokens.begin(), b.tokens.end());
  return a.tokens.size() < b.tokens.size();
}

namespace {

struct Candidate {
  int from;      // index of the live hypothesis it extends
  int token;
  real logp;     // accumulated
};

}  // namespace

BeamResult beam_search(const StepFn& step, int vocab, int eos_id, int beam,
                       real alpha, int max_len) {
  if (beam < 1) throw ContractError("beam_search: beam >= 1");
  if (alpha < real(0) || alpha > real(1))
    throw ContractError("beam_search: alpha must lie in [0, 1]");
  if (max_len < 1) throw ContractError("beam_search: max_len >= 1");

  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;
  // Index of the live hypothesis tracing the greedy path; the beam always
  // keeps that line alive (so widening the beam can never lose to greedy),
  // and with beam == 1 the search IS greedy.
  int greedy_idx = 0;

  for (int t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<Candidate> cands;
    cands.reserve(live.size() * static_cast<size_t>(vocab));
    for (size_t i = 0; i < live.size(); ++i) {
      const std::vector<real> lp = step(live[i].tokens);
      if (static_cast<int>(lp.size()) != vocab)
        throw ContractError("beam_search: step function vocab mismatch");
      for (int v = 0; v < vocab; ++v)
        cands.push_back({static_cast<int>(i), v,
                         live[i].logp + lp[static_cast<size_t>(v)]});
    }
    // The greedy continuation: best extension of the greedy-line hypothesis
    // (ties toward the lower token id).
    Candidate greedy_cand{-1, -1, real(0)};
    if (greedy_idx >= 0) {
      for (const Candidate& c : cands)
        if (c.from == greedy_idx &&
            (greedy_cand.from < 0 || c.logp > greedy_cand.logp))
          greedy_cand = c;
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) {
                       return a.logp > b.logp;
                     });

    std::vector<Hypothesis> next;
    int next_greedy = -1;
    auto emit = [&](const Candidate& c) {
      Hypothesis h = live[static_cast<size_t>(c.from)];
      h.tokens.push_back(c.token);
      h.logp = c.logp;
      if (c.token == eos_id) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        if (greedy_cand.from >= 0 && c.from == greedy_cand.from &&
            c.token == greedy_cand.token)
          next_greedy = static_cast<int>(next.size());
        next.push_back(std::move(h));
      }
    };

    if (beam == 1) {
      // Exactly the greedy step: the single best extension survives.
      emit(cands.front());
    } else {
      // Every live hypothesis retires its eos-extension (completions are
      // never pruned), the live set refills with the top non-eos
      // extensions, and the greedy line is always kept.
      for (const Candidate& c : cands)
        if (c.token == eos_id) emit(c);
      std::vector<Candidate> kept;
      for (const Candidate& c : cands) {
        if (c.token == eos_id) continue;
        if (static_cast<int>(kept.size()) < beam) kept.push_back(c);
      }
      if (greedy_cand.from >= 0 && greedy_cand.token != eos_id) {
        bool present = false;
        for (const Candidate& c : kept)
          present = present || (c.from == greedy_cand.from &&
                                c.token == greedy_cand.token);
        if (!present && !kept.empty()) kept.back() = greedy_cand;
      }
      for (const Candidate& c : kept) emit(c);
    }
    live = std::move(next);
    greedy_idx = next_greedy;
  }

  // Finished hypotheses take priority; the live remainder is only a
  // fallback when nothing finished within max_len.
  std::vector<Hypothesis> pool = finished.empty() ? live : finished;
  if (pool.empty()) throw ContractError("beam_search: empty pool");
  std::stable_sort(pool.begin(), pool.end(),
                   [alpha](const Hypothesis& a, const Hypothesis& b) {
                     return hypothesis_better(a, b, alpha);
                   });
  BeamResult res;
  res.best = pool.front();
  res.fallback_unfinished = !res.best.finished;
  const size_t n = std::min(pool.size(), static_cast<size_t>(beam));
  res.nbest.assign(pool.begin(), pool.begin() + static_cast<long>(n));
  return res;
}

Hypothesis greedy_decode(const StepFn& step, int vocab, int eos_id,
                         int max_len) {
  Hypothesis h;
  for (int t = 0; t < max_len; ++t) {
    const std::vector<real> lp = step(h.tokens);
    if (static_cast<int>(lp.size()) != vocab)
      throw ContractError("greedy_decode: step function vocab mismatch");
    int best = 0;
    for (int v = 1; v < vocab; ++v)
      if (lp[static_cast<size_t>(v)] > lp[static_cast<size_t>(best)]) best = v;
    h.tokens.push_back(best);
    h.logp += lp[static_cast<size_t>(best)];
    if (best == eos_id) {
      h.finished = true;
      break;
    }
  }
  return h;
}

StepFn model_step_fn(const Parameters& params, const ModelConfig& cfg,
                     const EncodedSources& enc) {
  return [&params, &cfg, &enc](const std::vector<int>& prefix) {
    return next_token_logprobs(params, cfg, enc, prefix);
  };
}

Hypothesis decode_sentence(const Parameters& params, const ModelConfig& cfg,
                           const std::vector<std::vector<int>>& sources,
                           int beam, real alpha, int max_len) {
  const EncodedSources enc = encode_sources(params, cfg, sources);
  const StepFn step = model_step_fn(params, cfg, enc);
  if (beam == 1) return greedy_decode(step, cfg.vocab_size, Vocabulary::kEos,
                                      max_len);
  return beam_search(step, cfg.vocab_size, Vocabulary::kEos, beam, alpha,
                     max_len)
      .best;
}

}  // namespace trice
