#include "trice/pipeline.hpp"

namespace trice {

StageConfig make_stage_config(const PipelineEnv& env,
                              const PipelineBudget& budget, Objective o,
                              long steps) {
  StageConfig sc;
  sc.objective = o;
  const char* base = o == Objective::kDenoising ? "dp"
                     : o == Objective::kSsg     ? "ds"
                                                : "dm";
  sc.train_path = env.data_dir + "/" + base + ".train.tsv";
  sc.dev_path = env.data_dir + "/" + base + ".dev.tsv";
  sc.batch_tokens = budget.batch_tokens;
  sc.warmup = budget.warmup;
  sc.max_steps = steps;
  sc.eval_every = budget.eval_every;
  sc.seed = env.seed;
  sc.lr_scale = budget.lr_scale;
  sc.corruption_ratio = budget.corruption_ratio;
  sc.dropout = budget.dropout;
  return sc;
}

Checkpoint run_pretrain(const PipelineEnv& env, const PipelineBudget& budget) {
  const StageConfig sc =
      make_stage_config(env, budget, Objective::kDenoising,
                        budget.pretrain_steps);
  return train_stage(sc, nullptr, env.vocab, env.msg_config.ssg_variant(),
                     env.log);
}

Checkpoint run_ssg(const PipelineEnv& env, const PipelineBudget& budget,
                   const Checkpoint* init) {
  const StageConfig sc =
      make_stage_config(env, budget, Objective::kSsg, budget.ssg_steps);
  return train_stage(sc, init, env.vocab, env.msg_config.ssg_variant(),
                     env.log);
}

Checkpoint run_msg(const PipelineEnv& env, const PipelineBudget& budget,
                   const Checkpoint& init, const ModelConfig& msg_config,
                   bool direct, FreezePolicy freeze,
                   const std::string& train_override) {
  StageConfig sc =
      make_stage_config(env, budget, Objective::kMsg, budget.msg_steps);
  sc.direct = direct;
  sc.freeze = freeze;
  if (!train_override.empty()) sc.train_path = train_override;
  return train_stage(sc, &init, env.vocab, msg_config, env.log);
}

EvalReport test_report(const PipelineEnv& env, const Checkpoint& ckpt,
                       const DecodeOptions& opts, int use_source) {
  const auto lines = read_lines(env.data_dir + "/dm.test.tsv");
  return evaluate_corpus(ckpt.params, ckpt.config, env.vocab, lines, opts,
                         use_source);
}

}  // namespace trice
