#pragma once

#include <functional>
#include <vector>

#include "trice/model.hpp"

namespace trice {

struct Hypothesis {
  std::vector<int> tokens;  // emitted ids; ends with eos when finished
  real logp = real(0);
  bool finished = false;
};

/// ((5 + n) / 6)^alpha
real length_penalty(int n, real alpha);

/// Penalized score used for final ranking.
real hypothesis_score(const Hypothesis& h, real alpha);

/// Ordering: higher penalized score wins; ties break toward the
/// lexicographically smaller token sequence, then the shorter one.
bool hypothesis_better(const Hypothesis& a, const Hypothesis& b, real alpha);

/// Next-token log-probabilities given the emitted prefix (bos implied).
using StepFn = std::function<std::vector<real>(const std::vector<int>&)>;

struct BeamResult {
  Hypothesis best;
  std::vector<Hypothesis> nbest;
  bool fallback_unfinished = false;  // max-len hit with nothing finished
};

/// Deterministic beam search over the length-penalized objective. Each
/// step ranks all extensions by accumulated log-probability (ties toward
/// the lower token id); every live hypothesis retires its eos-extension
/// into the finished pool and the top `beam` non-eos extensions stay
/// live, with the greedy line always among them. beam == 1 degenerates to
/// exactly greedy_decode. Finished hypotheses win the final ranking;
/// unfinished output only appears (flagged) when nothing finished.
BeamResult beam_search(const StepFn& step, int vocab, int eos_id, int beam,
                       real alpha, int max_len);

Hypothesis greedy_decode(const StepFn& step, int vocab, int eos_id,
                         int max_len);

/// StepFn over a trained model: sources are encoded once and reused for
/// every decoding step.
StepFn model_step_fn(const Parameters& params, const ModelConfig& cfg,
                     const EncodedSources& enc);

/// Decodes one example; beam == 1 runs the greedy path.
Hypothesis decode_sentence(const Parameters& params, const ModelConfig& cfg,
                           const std::vector<std::vector<int>>& sources,
                           int beam, real alpha, int max_len);

}  // namespace trice
