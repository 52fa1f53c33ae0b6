// Seeded toy autoregressive models plus an exhaustive-enumeration oracle
// for the length-penalized decoding objective. Test-only; the oracle
// reimplements scoring and tie-breaking independently of the decoder.
#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "trice/decode.hpp"

namespace toy {

using trice::real;

/// Next-token distribution depends on (position, last emitted token);
/// "state 0" is the start-of-sequence state.
struct ToyModel {
  int vocab;
  int max_len;
  // logprobs[pos][state][token]
  std::vector<std::vector<std::vector<real>>> logprobs;

  static ToyModel random(int vocab, int max_len, std::uint64_t seed,
                         double sharpness) {
    ToyModel m;
    m.vocab = vocab;
    m.max_len = max_len;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sharpness);
    m.logprobs.resize(static_cast<size_t>(max_len));
    for (auto& per_state : m.logprobs) {
      per_state.resize(static_cast<size_t>(vocab) + 1);
      for (auto& row : per_state) {
        row.resize(static_cast<size_t>(vocab));
        double mx = -1e300;
        for (auto& v : row) {
          v = static_cast<real>(n(rng));
          mx = std::max(mx, static_cast<double>(v));
        }
        double sum = 0.0;
        for (real v : row) sum += std::exp(static_cast<double>(v) - mx);
        const real lse = static_cast<real>(mx + std::log(sum));
        for (auto& v : row) v -= lse;
      }
    }
    return m;
  }

  trice::StepFn step_fn() const {
    return [this](const std::vector<int>& prefix) {
      const size_t pos = prefix.size();
      const size_t state =
          prefix.empty() ? 0 : static_cast<size_t>(prefix.back()) + 1;
      return logprobs[pos][state];
    };
  }
};

/// Every finished sequence (first eos terminates it) plus every eos-free
/// sequence of exactly max_len tokens.
inline void enumerate(const ToyModel& m, int eos,
                      std::vector<int>& prefix, real logp,
                      std::vector<trice::Hypothesis>& out) {
  const size_t pos = prefix.size();
  if (pos == static_cast<size_t>(m.max_len)) {
    out.push_back({prefix, logp, false});
    return;
  }
  const size_t state =
      prefix.empty() ? 0 : static_cast<size_t>(prefix.back()) + 1;
  for (int v = 0; v < m.vocab; ++v) {
    const real lp = logp + m.logprobs[pos][state][static_cast<size_t>(v)];
    prefix.push_back(v);
    if (v == eos) {
      out.push_back({prefix, lp, true});
    } else {
      enumerate(m, eos, prefix, lp, out);
    }
    prefix.pop_back();
  }
}

/// Independent scoring: logp / ((5+n)/6)^alpha with n = emitted tokens.
inline double oracle_score(const trice::Hypothesis& h, real alpha) {
  const double n = static_cast<double>(h.tokens.size());
  return static_cast<double>(h.logp) /
         std::pow((5.0 + n) / 6.0, static_cast<double>(alpha));
}

/// Best hypothesis over the whole space. Finished sequences take priority
/// (the decoder only falls back to unfinished output when nothing finished
/// in time, which cannot happen here because eos is always available).
inline trice::Hypothesis oracle_best(const ToyModel& m, int eos, real alpha) {
  std::vector<trice::Hypothesis> all;
  std::vector<int> prefix;
  enumerate(m, eos, prefix, real(0), all);
  const trice::Hypothesis* best = nullptr;
  for (const auto& h : all) {
    if (!h.finished) continue;
    if (!best) {
      best = &h;
      continue;
    }
    const double sh = oracle_score(h, alpha);
    const double sb = oracle_score(*best, alpha);
    if (sh > sb) {
      best = &h;
    } else if (sh == sb) {
      if (h.tokens < best->tokens ||
          (h.tokens == best->tokens && h.tokens.size() < best->tokens.size()))
        best = &h;
    }
  }
  return *best;
}

}  // namespace toy
