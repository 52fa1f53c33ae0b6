#pragma once

#include <string>

#include "trice/evalrun.hpp"
#include "trice/trainer.hpp"

namespace trice {

/// Step budgets and shared knobs for a full gradual-finetuning run over a
/// generated corpus directory (dp/ds/dm files as written by gen-data).
struct PipelineBudget {
  long pretrain_steps = 600;
  long ssg_steps = 800;
  long msg_steps = 1000;
  long batch_tokens = 1024;
  long warmup = 200;
  long eval_every = 200;
  real lr_scale = real(1);
  double corruption_ratio = 0.3;
  real dropout = real(0);
};

struct PipelineEnv {
  std::string data_dir;
  Vocabulary vocab;
  ModelConfig msg_config;  // the multi-source architecture
  std::uint64_t seed = 1;
  TrainLogger log;  // optional
};

StageConfig make_stage_config(const PipelineEnv& env,
                              const PipelineBudget& budget, Objective o,
                              long steps);

/// Denoising pretraining on dp.train/dp.dev, fresh initialization.
Checkpoint run_pretrain(const PipelineEnv& env, const PipelineBudget& budget);

/// Single-source finetuning on ds.* from a pretrained checkpoint
/// (or fresh when `init` is null).
Checkpoint run_ssg(const PipelineEnv& env, const PipelineBudget& budget,
                   const Checkpoint* init);

/// Multi-source finetuning on dm.*; `init` is an ssg checkpoint on the
/// gradual path or a pretrained one with direct=true. `msg_config`
/// overrides env.msg_config so ablation variants can flip flags.
Checkpoint run_msg(const PipelineEnv& env, const PipelineBudget& budget,
                   const Checkpoint& init, const ModelConfig& msg_config,
                   bool direct = false,
                   FreezePolicy freeze = FreezePolicy::kNone,
                   const std::string& train_override = "");

/// Greedy/beam BLEU of a checkpoint on dm.test; use_source > 0 feeds only
/// that source (for single-source models).
EvalReport test_report(const PipelineEnv& env, const Checkpoint& ckpt,
                       const DecodeOptions& opts, int use_source = 0);

}  // namespace trice
