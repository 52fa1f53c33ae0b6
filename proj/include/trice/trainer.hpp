#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "trice/checkpoint.hpp"
#include "trice/corpus.hpp"
#include "trice/model.hpp"

namespace trice {

struct OptimizerState {
  std::map<std::string, Tensor> m, v;  // first/second moment per parameter
  long step = 0;
  real beta1 = real(0.9);
  real beta2 = real(0.98);
  real eps = real(1e-9);
};

/// Bias-corrected Adam step over every named gradient. Tensors absent from
/// `grads` are treated as zero-gradient.
void adam_update(Parameters& params, const std::map<std::string, Tensor>& grads,
                 OptimizerState& state, real lr);

/// lr = d^-0.5 * min(step^-0.5, step * warmup^-1.5)
real lr_inverse_sqrt(long step, long warmup, int d);

/// Global-norm gradient clipping; returns the pre-clip norm.
double clip_gradients(std::map<std::string, Tensor>& grads, double max_norm);

enum class Objective { kDenoising, kSsg, kMsg };
std::string objective_name(Objective o);
Objective parse_objective(const std::string& name);

enum class FreezePolicy { kNone, kFreezePretrained };

struct StageConfig {
  Objective objective = Objective::kSsg;
  std::string train_path;
  std::string dev_path;
  long batch_tokens = 1024;
  long warmup = 500;
  long max_steps = 1000;
  long eval_every = 200;
  std::uint64_t seed = 1;
  FreezePolicy freeze = FreezePolicy::kNone;
  real lr_scale = real(1);
  double clip_norm = 1.0;
  double corruption_ratio = 0.3;  // denoising only
  real dropout = real(0);
  bool direct = false;  // allow msg training from a pretrained checkpoint
};

struct TrainLogEntry {
  long step;
  double train_loss;
  double dev_loss;  // NaN when not evaluated at this step
  double lr;
};
using TrainLogger = std::function<void(const TrainLogEntry&)>;

/// Runs one finetuning stage and returns the best-dev checkpoint. `init`
/// null means fresh initialization (only meaningful for pretraining and
/// sanity setups); stage ordering pretrained -> ssg -> msg is enforced
/// unless `direct` is set.
Checkpoint train_stage(const StageConfig& config, const Checkpoint* init,
                       const Vocabulary& vocab, const ModelConfig& arch,
                       const TrainLogger& log = nullptr);

/// Copies every carried-over tensor bitwise into the multi-source
/// architecture and freshly initializes the fine encoder from `seed`.
Checkpoint extend_to_msg(const Checkpoint& ssg, const ModelConfig& msg_config,
                         std::uint64_t seed, bool allow_direct = false);

/// Mean dev-objective loss (forward only).
double evaluate_loss(const Parameters& params, const ModelConfig& cfg,
                     const std::vector<MultiSourceExample>& examples,
                     long batch_tokens);

/// Objective-specific corpus loading: raw lines -> encoded examples.
/// Denoising examples are corrupted on the fly per (seed, epoch, index),
/// so this returns the clean encoded sentences for that objective.
std::vector<MultiSourceExample> load_stage_examples(const Vocabulary& vocab,
                                                    Objective objective,
                                                    const std::string& path);

/// Builds the denoising example for sentence ids under a derived seed.
MultiSourceExample denoising_example(const std::vector<int>& sentence_ids,
                                     double ratio, int num_sources,
                                     std::uint64_t seed);

}  // namespace trice
