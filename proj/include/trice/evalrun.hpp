#pragma once

#include <string>
#include <utility>
#include <vector>

#include "trice/bleu.hpp"
#include "trice/decode.hpp"

namespace trice {

struct DecodeOptions {
  int beam = 4;
  real alpha = real(0.6);
  int max_len = 0;  // 0 = model max_len
  bool parallel = true;
};

/// Decodes every line of a D_m-format corpus (targets, when present, are
/// ignored). Sentences fan out across a worker pool; output order is the
/// input order.
std::vector<std::string> translate_corpus(
    const Parameters& params, const ModelConfig& cfg, const Vocabulary& vocab,
    const std::vector<std::string>& lines, const DecodeOptions& opts);

/// Decode + corpus BLEU against the target field. `use_source` picks one
/// source (1-based) for single-source models; 0 feeds all K sources.
EvalReport evaluate_corpus(const Parameters& params, const ModelConfig& cfg,
                           const Vocabulary& vocab,
                           const std::vector<std::string>& lines,
                           const DecodeOptions& opts, int use_source = 0,
                           bool smooth = false);

struct AdversarialResult {
  EvalReport normal;
  EvalReport randomized;
  double delta = 0.0;  // normal - randomized
};

/// Replaces source `which` (1-based) of every example with the same-index
/// source of another uniformly drawn example, then scores both conditions
/// with identical decode settings.
AdversarialResult adversarial_eval(const Parameters& params,
                                   const ModelConfig& cfg,
                                   const Vocabulary& vocab,
                                   const std::vector<std::string>& lines,
                                   int which, std::uint64_t seed,
                                   const DecodeOptions& opts,
                                   bool smooth = false);

/// Splits a corpus line into tab-separated fields.
std::vector<std::string> split_fields(const std::string& line);

}  // namespace trice
