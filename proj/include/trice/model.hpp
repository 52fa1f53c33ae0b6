#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "trice/corpus.hpp"
#include "trice/ops.hpp"

namespace trice {

enum class Stage { kPretrained, kSsg, kMsg };
std::string stage_name(Stage s);
Stage parse_stage(const std::string& name);

// Architecture hyperparameters plus variant switches. The parameter name
// set is a pure function of this struct.
struct ModelConfig {
  int d = 64;
  int heads = 4;
  int d_ff = 256;
  int n_coarse = 4;
  int n_fine = 1;
  int n_decoder = 4;
  int num_sources = 2;
  int vocab_size = 0;
  int max_len = 64;
  bool use_fine_encoder = true;
  bool fine_encoder_cross_attention = true;
  bool separated_decoder_cross_attention = true;
  bool use_segment_embedding = true;
  // Off = the coarse encoder runs per source instead of over the
  // concatenation (block-diagonal self-attention).
  bool concatenated_encoding = true;

  int effective_n_fine() const { return use_fine_encoder ? n_fine : 0; }
  void validate() const;

  /// The architecture used for pretraining and single-source finetuning:
  /// no fine encoder, no segment embedding, one source per example.
  ModelConfig ssg_variant() const;

  std::map<std::string, std::string> to_kv() const;
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
};

/// Named parameter tensors, ordered map for deterministic traversal.
using Parameters = std::map<std::string, Tensor>;

/// Canonical (name, shape) list derived from the config.
std::vector<std::pair<std::string, std::vector<int>>> parameter_specs(
    const ModelConfig& cfg);

/// Truncated-normal(0.02) weights, zero biases, unit layer-norm gains.
Parameters init_parameters(const ModelConfig& cfg, std::uint64_t seed);

/// The per-tensor policy behind init_parameters, keyed on the name.
void init_parameter_tensor(Tensor& t, const std::string& name,
                           std::mt19937_64& rng);

/// True for fine-encoder tensors (the randomly initialized extension);
/// everything else is carried over from the single-source model.
bool is_fine_encoder_param(const std::string& name);

// Parameters registered as gradient roots on a tape. Lookup by name.
struct BoundParams {
  std::map<std::string, Tensor> tensors;
  const Tensor& operator()(const std::string& name) const;
};
BoundParams bind_parameters(Tape& tape, const Parameters& params);
std::map<std::string, Tensor> grads_by_name(const BoundParams& bound,
                                            const GradMap& grads);

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  int heads = 1;
};
AttentionParams attention_params(const BoundParams& bound,
                                 const std::string& prefix, int heads);

/// Constant sinusoidal per-source offset; never trained. Even dims carry
/// the sine term, odd dims the cosine counterpart.
Tensor segment_embedding(int k, int d);

/// Scaled dot-product multi-head attention with optional 0/1 keep-mask of
/// shape [query-len x key-len]. Rows with nothing to attend to come out
/// zero and are counted by ops::dead_softmax_rows().
Tensor multi_head_attention(Tape& tape, const Tensor& q, const Tensor& k,
                            const Tensor& v, const Tensor* keep_mask,
                            const AttentionParams& p);

/// Token + position (+ segment) embedding of one example's sources,
/// concatenated along the sequence axis. Positions restart per source.
Tensor input_representation(Tape& tape, const BoundParams& bound,
                            const ModelConfig& cfg,
                            const std::vector<std::vector<int>>& sources);

/// N_c post-norm Transformer encoder layers over the concatenation.
Tensor coarse_encode(Tape& tape, const BoundParams& bound,
                     const ModelConfig& cfg, const Tensor& x,
                     const std::vector<int>& source_lengths);

/// Contiguous partition by source boundaries.
std::vector<Tensor> split_sources(Tape& tape, const Tensor& r,
                                  const std::vector<int>& lengths);

/// One fine-encoder layer: per-source self-attention, cross-source
/// attention over the other sources' representations (skipped when the
/// variant flag is off or K == 1), then FFN; post-norm residuals.
std::vector<Tensor> fine_encoder_layer(Tape& tape, const BoundParams& bound,
                                       const ModelConfig& cfg, int layer,
                                       const std::vector<Tensor>& a);

/// N_f fine-encoder layers; identity when the fine encoder is disabled.
std::vector<Tensor> fine_encode(Tape& tape, const BoundParams& bound,
                                const ModelConfig& cfg,
                                const std::vector<Tensor>& r);

/// One decoder layer: causal self-attention, separated cross-attention
/// (one shared parameter set, outputs mean-pooled over sources; or joint
/// attention over the concatenation when the flag is off), then FFN.
Tensor decoder_layer(Tape& tape, const BoundParams& bound,
                     const ModelConfig& cfg, int layer, const Tensor& g,
                     const std::vector<Tensor>& enc);

struct ForwardOptions {
  real dropout = real(0);
  std::uint64_t dropout_seed = 0;
};

struct ForwardResult {
  Tensor loss;  // mean over examples of per-example mean token NLL
  std::vector<std::vector<real>> token_logprob;  // [example][target step]
  double token_accuracy = 0.0;  // teacher-forced argmax accuracy
};

/// Teacher-forced pass over a padded batch. Pad positions never influence
/// live rows (attention and loss run on the unpadded prefixes).
ForwardResult forward_logprob(Tape& tape, const BoundParams& bound,
                              const ModelConfig& cfg, const Batch& batch,
                              const ForwardOptions& opts = {});

// ---- inference-side entry points (no tape kept) ---------------------------

struct EncodedSources {
  std::vector<Tensor> reps;  // per source: [I_k x d]
};

/// Runs embedding + coarse + fine encoders once for one example.
EncodedSources encode_sources(const Parameters& params, const ModelConfig& cfg,
                              const std::vector<std::vector<int>>& sources);

/// Log-probabilities of the next token given emitted prefix (bos implied).
std::vector<real> next_token_logprobs(const Parameters& params,
                                      const ModelConfig& cfg,
                                      const EncodedSources& enc,
                                      const std::vector<int>& prefix);

/// Sum over target steps of log P(y_j | sources, y_<j); target must be
/// bos ... eos.
real score_sequence(const Parameters& params, const ModelConfig& cfg,
                    const std::vector<std::vector<int>>& sources,
                    const std::vector<int>& target);

}  // namespace trice
