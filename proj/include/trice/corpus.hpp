#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trice/vocab.hpp"

namespace trice {

/// K tagged source id-sequences plus one bos...eos target id-sequence.
struct MultiSourceExample {
  std::vector<std::vector<int>> sources;
  std::vector<int> target;
};

/// One padded training batch. Masks hold true exactly at pad positions.
struct SourceBatch {
  int num_sources = 0;
  // Per source k: [batch x max-len-of-source-k] id matrix plus pad mask.
  std::vector<std::vector<std::vector<int>>> ids;
  std::vector<std::vector<std::vector<bool>>> pad_mask;
  std::vector<std::vector<int>> lengths;  // [k][example]
};

struct TargetBatch {
  std::vector<std::vector<int>> ids;        // [batch x max-target-len], padded
  std::vector<std::vector<bool>> pad_mask;  // true at pads
  std::vector<int> lengths;
};

struct Batch {
  SourceBatch sources;
  TargetBatch targets;
};

enum class SyntheticTask { kComplementaryHalves, kNoisyDuplicate, kTaggedCopy };

SyntheticTask parse_task(const std::string& name);
std::string task_name(SyntheticTask task);

struct GenSpec {
  SyntheticTask task = SyntheticTask::kComplementaryHalves;
  int dm_train = 50000;
  int dm_dev = 1000;
  int dm_test = 500;
  int dp_train = 20000;
  int dp_dev = 1000;
  int alphabet = 24;       // tokens per synthetic language
  int min_tokens = 3;      // source content length bounds
  int max_tokens = 12;
  double duplicate_noise = 0.3;  // noisy-duplicate only
  std::uint64_t seed = 1;
};

/// Text corpora for the three training stages. Lines are tab-separated
/// token fields: D_p has one field, D_s two, D_m K+1.
struct CorpusSet {
  int num_sources = 0;
  SyntheticTask task = SyntheticTask::kComplementaryHalves;
  std::vector<std::string> dp_train, dp_dev;
  std::vector<std::string> ds_train, ds_dev;
  std::vector<std::string> dm_train, dm_dev, dm_test;
};

/// Deterministic synthetic corpus generation; the multi-source tasks are
/// built so that sources are complementary (each source pins half of the
/// target) or redundant, and D_s/D_p derive from the same distributions.
CorpusSet gen_synthetic_corpus(const GenSpec& spec);

void write_corpus_set(const CorpusSet& corpus, const std::string& dir);
std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::vector<std::string>& lines,
                 const std::string& path);

/// Replaces contiguous spans (~`ratio` of the maskable tokens, geometric
/// lengths of mean 3) with single mask ids. bos/eos and the reserved block
/// (including language tags) are never corrupted.
std::vector<int> corrupt_for_denoising(const std::vector<int>& sentence,
                                       double ratio, int mask_id,
                                       int protected_below,
                                       std::uint64_t seed);

/// Uniformly keeps one source (with its tag) and the unchanged target.
MultiSourceExample sample_single_source(const MultiSourceExample& example,
                                        std::uint64_t seed);

/// Tab-separated line -> encoded example (last field is the target).
MultiSourceExample encode_example(const Vocabulary& vocab,
                                  const std::string& line);

long example_tokens(const MultiSourceExample& e);

/// Pads every sequence to the per-source batch maximum. Throws if the
/// padded batch exceeds `max_tokens`.
Batch make_batch(const std::vector<MultiSourceExample>& examples, int pad_id,
                 long max_tokens);

/// Deterministic shuffle + greedy packing under the padded-token budget.
std::vector<std::vector<int>> pack_batches(
    const std::vector<MultiSourceExample>& examples, long max_tokens,
    std::uint64_t seed);

}  // namespace trice
