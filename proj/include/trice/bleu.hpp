#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trice/common.hpp"

namespace trice {

struct EvalReport {
  double bleu = 0.0;  // 0..100
  std::array<double, 4> precisions{0.0, 0.0, 0.0, 0.0};
  double brevity_penalty = 1.0;
  std::optional<double> token_accuracy;
  std::optional<double> p_value;
};

/// Corpus-level BLEU-4 with clipped counts and the exponential brevity
/// penalty. N-gram orders that cannot occur anywhere in the hypothesis
/// corpus (total count 0) drop out of the geometric mean; an order with
/// zero matches floors the score to 0 unless add-one smoothing is on
/// (then orders above unigram score (m+1)/(t+1)).
EvalReport corpus_bleu(const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references,
                       bool smooth_add_one = false);

/// Paired bootstrap resampling: fraction of resampled corpora where
/// BLEU(a) <= BLEU(b), ties counted half.
double paired_bootstrap(const std::vector<std::string>& hyps_a,
                        const std::vector<std::string>& hyps_b,
                        const std::vector<std::string>& refs, int samples,
                        std::uint64_t seed);

}  // namespace trice
