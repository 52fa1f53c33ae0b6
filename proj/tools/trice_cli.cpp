// Command-line surface for the multi-source sequence generation toolkit:
// corpus generation, vocabulary building, the three-stage training
// pipeline, decoding, BLEU evaluation, adversarial evaluation, and the
// ablation matrix. One JSON result object per line on stdout; logs on
// stderr. Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "trice/checkpoint.hpp"
#include "trice/pipeline.hpp"

using json = nlohmann::json;
using namespace trice;

namespace {

// Defaults shared by every training/decoding command; the --config file
// (key=value lines, '#' comments) overrides these, explicit flags win.
struct Settings {
  ModelConfig model;
  long batch_tokens = 1024;
  long warmup = 500;
  long steps = 1000;
  long eval_every = 200;
  double lr_scale = 1.0;
  double clip_norm = 1.0;
  double dropout = 0.0;
  double ratio = 0.3;
  int beam = 4;
  double alpha = 0.6;
};

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }
  return kv;
}

Settings load_settings(const std::string& config_path) {
  Settings s;
  if (config_path.empty()) return s;
  const auto kv = read_config_file(config_path);
  s.model = ModelConfig::from_kv(kv);
  const auto getl = [&kv](const char* k, long dflt) {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : std::stol(it->second);
  };
  const auto getd = [&kv](const char* k, double dflt) {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : std::stod(it->second);
  };
  s.batch_tokens = getl("batch_tokens", s.batch_tokens);
  s.warmup = getl("warmup", s.warmup);
  s.steps = getl("steps", s.steps);
  s.eval_every = getl("eval_every", s.eval_every);
  s.lr_scale = getd("lr_scale", s.lr_scale);
  s.clip_norm = getd("clip_norm", s.clip_norm);
  s.dropout = getd("dropout", s.dropout);
  s.ratio = getd("corruption_ratio", s.ratio);
  s.beam = static_cast<int>(getl("beam", s.beam));
  s.alpha = getd("alpha", s.alpha);
  return s;
}

void emit(const json& j) { std::cout << j.dump() << "\n" << std::flush; }

void log_progress(const TrainLogEntry& e) {
  std::cerr << "step " << e.step << " train " << e.train_loss;
  if (e.dev_loss == e.dev_loss) std::cerr << " dev " << e.dev_loss;
  std::cerr << " lr " << e.lr << "\n";
}

json report_json(const char* command, const EvalReport& rep) {
  json j{{"command", command},
         {"bleu", rep.bleu},
         {"precisions", rep.precisions},
         {"bp", rep.brevity_penalty}};
  if (rep.token_accuracy) j["token_accuracy"] = *rep.token_accuracy;
  if (rep.p_value) j["p_value"] = *rep.p_value;
  return j;
}

StageConfig stage_config(const Settings& s, Objective o,
                         const std::string& train, const std::string& dev,
                         std::uint64_t seed) {
  StageConfig sc;
  sc.objective = o;
  sc.train_path = train;
  sc.dev_path = dev;
  sc.batch_tokens = s.batch_tokens;
  sc.warmup = s.warmup;
  sc.max_steps = s.steps;
  sc.eval_every = s.eval_every;
  sc.seed = seed;
  sc.lr_scale = static_cast<real>(s.lr_scale);
  sc.clip_norm = s.clip_norm;
  sc.corruption_ratio = s.ratio;
  sc.dropout = static_cast<real>(s.dropout);
  return sc;
}

struct CommonOpts {
  std::string config;
  std::string checkpoint;
  std::uint64_t seed = 1;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--config", c.config, "key=value configuration file");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--checkpoint", c.checkpoint, "checkpoint path");
}

// ---- subcommand bodies -----------------------------------------------------

struct GenDataArgs {
  CommonOpts common;
  std::string task = "complementary-halves";
  std::string out;
  GenSpec spec;
};

int run_gen_data(const GenDataArgs& a) {
  GenSpec spec = a.spec;
  spec.task = parse_task(a.task);
  spec.seed = a.common.seed;
  const CorpusSet corpus = gen_synthetic_corpus(spec);
  write_corpus_set(corpus, a.out);
  emit({{"command", "gen-data"},
        {"task", a.task},
        {"out", a.out},
        {"num_sources", corpus.num_sources},
        {"dm_train", corpus.dm_train.size()},
        {"dm_dev", corpus.dm_dev.size()},
        {"dm_test", corpus.dm_test.size()},
        {"dp_train", corpus.dp_train.size()},
        {"ds_train", corpus.ds_train.size()}});
  return 0;
}

struct BuildVocabArgs {
  CommonOpts common;
  std::vector<std::string> files;
  std::string out;
  int num_sources = 2;
};

int run_build_vocab(const BuildVocabArgs& a) {
  Vocabulary vocab = build_vocab(a.files, a.num_sources);
  vocab.save(a.out);
  emit({{"command", "build-vocab"},
        {"out", a.out},
        {"size", vocab.size()},
        {"num_sources", vocab.num_sources()}});
  return 0;
}

struct TrainArgs {
  CommonOpts common;
  std::string train, dev, vocab, out;
  long steps = -1;
  bool direct = false;
  bool freeze = false;
  bool from_scratch = false;
  // architecture ablation switches for finetune-msg
  bool no_fine_encoder = false;
  bool no_fine_ca = false;
  bool no_separated_ca = false;
  bool no_concat_encoding = false;
  bool no_segment_embedding = false;
};

ModelConfig msg_config_for(const Settings& s, const Vocabulary& vocab,
                           const TrainArgs& a) {
  ModelConfig cfg = s.model;
  cfg.vocab_size = vocab.size();
  cfg.num_sources = vocab.num_sources();
  if (a.no_fine_encoder) cfg.use_fine_encoder = false;
  if (a.no_fine_ca) cfg.fine_encoder_cross_attention = false;
  if (a.no_separated_ca) cfg.separated_decoder_cross_attention = false;
  if (a.no_concat_encoding) cfg.concatenated_encoding = false;
  if (a.no_segment_embedding) cfg.use_segment_embedding = false;
  return cfg;
}

int run_train(const char* command, Objective objective, const TrainArgs& a) {
  Settings s = load_settings(a.common.config);
  if (a.steps > 0) s.steps = a.steps;
  const Vocabulary vocab = Vocabulary::load(a.vocab);
  StageConfig sc = stage_config(s, objective, a.train, a.dev, a.common.seed);
  sc.direct = a.direct;
  if (a.freeze) sc.freeze = FreezePolicy::kFreezePretrained;

  Checkpoint init;
  bool have_init = false;
  if (!a.common.checkpoint.empty() && !a.from_scratch) {
    init = load_checkpoint(a.common.checkpoint);
    have_init = true;
  }
  const ModelConfig msg_cfg = msg_config_for(s, vocab, a);
  const ModelConfig arch =
      objective == Objective::kMsg ? msg_cfg : msg_cfg.ssg_variant();

  double best_dev = std::numeric_limits<double>::quiet_NaN();
  TrainLogger logger = [&best_dev](const TrainLogEntry& e) {
    if (e.dev_loss == e.dev_loss)
      best_dev = best_dev == best_dev ? std::min(best_dev, e.dev_loss)
                                      : e.dev_loss;
    log_progress(e);
  };
  Checkpoint out =
      train_stage(sc, have_init ? &init : nullptr, vocab, arch, logger);
  save_checkpoint(out, a.out);
  vocab.save(a.out + ".vocab");  // decode commands look for it here
  json j{{"command", command},
         {"steps", out.step},
         {"stage", stage_name(out.stage)},
         {"out", a.out}};
  if (best_dev == best_dev) j["best_dev_loss"] = best_dev;
  emit(j);
  return 0;
}

struct DecodeArgs {
  CommonOpts common;
  std::string input, output, vocab_path, hyp, hyp_b, ref;
  int use_source = 0;
  int which = 1;
  int beam = -1;
  double alpha = -1;
  int bootstrap = 0;
  bool smooth = false;
};

DecodeOptions decode_options(const Settings& s, const DecodeArgs& a) {
  DecodeOptions opts;
  opts.beam = a.beam > 0 ? a.beam : s.beam;
  opts.alpha = static_cast<real>(a.alpha >= 0 ? a.alpha : s.alpha);
  return opts;
}

Vocabulary vocab_for(const DecodeArgs& a) {
  // The vocabulary rides next to the checkpoint unless given explicitly.
  return Vocabulary::load(a.vocab_path.empty() ? a.common.checkpoint + ".vocab"
                                               : a.vocab_path);
}

int run_translate(const DecodeArgs& a) {
  const Settings s = load_settings(a.common.config);
  const Checkpoint ckpt = load_checkpoint(a.common.checkpoint);
  const Vocabulary vocab = vocab_for(a);
  const auto lines = read_lines(a.input);
  const auto hyps = translate_corpus(ckpt.params, ckpt.config, vocab, lines,
                                     decode_options(s, a));
  if (a.output.empty() || a.output == "-") {
    for (const auto& h : hyps) std::cout << h << "\n";
  } else {
    write_lines(hyps, a.output);
    emit({{"command", "translate"},
          {"sentences", hyps.size()},
          {"output", a.output}});
  }
  return 0;
}

int run_evaluate(const DecodeArgs& a) {
  const Settings s = load_settings(a.common.config);
  if (!a.hyp.empty()) {
    // File mode: score hypothesis file(s) against a reference file.
    const auto hyps = read_lines(a.hyp);
    const auto refs = read_lines(a.ref);
    EvalReport rep = corpus_bleu(hyps, refs, a.smooth);
    if (a.bootstrap > 0 && !a.hyp_b.empty()) {
      const auto hyps_b = read_lines(a.hyp_b);
      rep.p_value =
          paired_bootstrap(hyps, hyps_b, refs, a.bootstrap, a.common.seed);
    }
    emit(report_json("evaluate", rep));
    return 0;
  }
  const Checkpoint ckpt = load_checkpoint(a.common.checkpoint);
  const Vocabulary vocab = vocab_for(a);
  const auto lines = read_lines(a.input);
  EvalReport rep = evaluate_corpus(ckpt.params, ckpt.config, vocab, lines,
                                   decode_options(s, a), a.use_source,
                                   a.smooth);
  emit(report_json("evaluate", rep));
  return 0;
}

int run_adversarial(const DecodeArgs& a) {
  const Settings s = load_settings(a.common.config);
  const Checkpoint ckpt = load_checkpoint(a.common.checkpoint);
  const Vocabulary vocab = vocab_for(a);
  const auto lines = read_lines(a.input);
  const AdversarialResult res =
      adversarial_eval(ckpt.params, ckpt.config, vocab, lines, a.which,
                       a.common.seed, decode_options(s, a), a.smooth);
  json normal = report_json("adversarial-eval", res.normal);
  normal["condition"] = "normal";
  normal["which"] = a.which;
  emit(normal);
  json randomized = report_json("adversarial-eval", res.randomized);
  randomized["condition"] = "randomized";
  randomized["which"] = a.which;
  randomized["delta"] = res.delta;
  emit(randomized);
  return 0;
}

struct AblateArgs {
  CommonOpts common;
  std::string data, vocab_path, out;
  long pretrain_steps = 400;
  long ssg_steps = 600;
  long msg_steps = 800;
  bool fine_variants = false;
};

int run_ablate(const AblateArgs& a) {
  const Settings s = load_settings(a.common.config);
  PipelineEnv env;
  env.data_dir = a.data;
  env.vocab = Vocabulary::load(a.vocab_path);
  env.msg_config = s.model;
  env.msg_config.vocab_size = env.vocab.size();
  env.msg_config.num_sources = env.vocab.num_sources();
  env.seed = a.common.seed;
  env.log = log_progress;

  PipelineBudget budget;
  budget.pretrain_steps = a.pretrain_steps;
  budget.ssg_steps = a.ssg_steps;
  budget.msg_steps = a.msg_steps;
  budget.batch_tokens = s.batch_tokens;
  budget.warmup = s.warmup;
  budget.eval_every = s.eval_every;
  budget.lr_scale = static_cast<real>(s.lr_scale);
  budget.corruption_ratio = s.ratio;

  DecodeOptions opts;
  opts.beam = s.beam;
  opts.alpha = static_cast<real>(s.alpha);

  std::cerr << "ablate: pretraining\n";
  const Checkpoint pre = run_pretrain(env, budget);
  std::cerr << "ablate: single-source finetuning\n";
  const Checkpoint ssg = run_ssg(env, budget, &pre);

  const auto score = [&](const char* variant, const ModelConfig& cfg,
                         const Checkpoint& init, bool direct) {
    std::cerr << "ablate: variant " << variant << "\n";
    const Checkpoint msg = run_msg(env, budget, init, cfg, direct);
    const EvalReport rep = test_report(env, msg, opts);
    json j = report_json("ablate", rep);
    j["variant"] = variant;
    emit(j);
    if (!a.out.empty()) save_checkpoint(msg, a.out + "/" + variant + ".ckpt");
  };

  // Table-8 row order: the full model, then one component removed at a
  // time.
  score("trice", env.msg_config, ssg, false);
  score("no_gradual", env.msg_config, pre, true);
  {
    ModelConfig c = env.msg_config;
    c.separated_decoder_cross_attention = false;
    score("no_separated_cross_attention", c, ssg, false);
  }
  {
    ModelConfig c = env.msg_config;
    c.concatenated_encoding = false;
    score("no_concatenated_encoding", c, ssg, false);
  }
  {
    ModelConfig c = env.msg_config;
    c.use_segment_embedding = false;
    score("no_segment_embedding", c, ssg, false);
  }
  if (a.fine_variants) {
    {
      ModelConfig c = env.msg_config;
      c.use_fine_encoder = false;
      score("fine_encoder_none", c, ssg, false);
    }
    {
      ModelConfig c = env.msg_config;
      c.fine_encoder_cross_attention = false;
      score("fine_encoder_no_ca", c, ssg, false);
    }
    {
      ModelConfig c = env.msg_config;
      c.n_fine = 2;
      score("fine_encoder_nf2", c, ssg, false);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-source sequence generation toolkit"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate synthetic corpora");
  add_common(gen_cmd, gen.common);
  gen_cmd->add_option("--task", gen.task,
                      "complementary-halves | noisy-duplicate | tagged-copy");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--dm-train", gen.spec.dm_train);
  gen_cmd->add_option("--dm-dev", gen.spec.dm_dev);
  gen_cmd->add_option("--dm-test", gen.spec.dm_test);
  gen_cmd->add_option("--dp-train", gen.spec.dp_train);
  gen_cmd->add_option("--dp-dev", gen.spec.dp_dev);
  gen_cmd->add_option("--alphabet", gen.spec.alphabet);
  gen_cmd->add_option("--min-tokens", gen.spec.min_tokens);
  gen_cmd->add_option("--max-tokens", gen.spec.max_tokens);
  gen_cmd->add_option("--noise", gen.spec.duplicate_noise);

  BuildVocabArgs bv;
  auto* bv_cmd = app.add_subcommand("build-vocab", "build a vocabulary file");
  add_common(bv_cmd, bv.common);
  bv_cmd->add_option("--out", bv.out, "vocabulary file")->required();
  bv_cmd->add_option("--num-sources", bv.num_sources, "number of sources K");
  bv_cmd->add_option("files", bv.files, "corpus files")->required();

  TrainArgs pre, ssg, msg;
  auto* pre_cmd =
      app.add_subcommand("pretrain", "denoising pretraining on D_p");
  auto* ssg_cmd =
      app.add_subcommand("finetune-ssg", "single-source finetuning on D_s");
  auto* msg_cmd =
      app.add_subcommand("finetune-msg", "multi-source finetuning on D_m");
  for (auto [cmd, args] : {std::pair{pre_cmd, &pre}, std::pair{ssg_cmd, &ssg},
                           std::pair{msg_cmd, &msg}}) {
    add_common(cmd, args->common);
    cmd->add_option("--train", args->train, "training corpus")->required();
    cmd->add_option("--dev", args->dev, "development corpus")->required();
    cmd->add_option("--vocab", args->vocab, "vocabulary file")->required();
    cmd->add_option("--out", args->out, "output checkpoint")->required();
    cmd->add_option("--steps", args->steps, "training steps");
  }
  ssg_cmd->add_flag("--from-scratch", ssg.from_scratch,
                    "ignore --checkpoint and initialize fresh");
  msg_cmd->add_flag("--direct", msg.direct,
                    "allow starting from a pretrained-stage checkpoint");
  msg_cmd->add_flag("--freeze", msg.freeze, "train only the fine encoder");
  msg_cmd->add_flag("--no-fine-encoder", msg.no_fine_encoder);
  msg_cmd->add_flag("--no-fine-ca", msg.no_fine_ca);
  msg_cmd->add_flag("--no-separated-ca", msg.no_separated_ca);
  msg_cmd->add_flag("--no-concat-encoding", msg.no_concat_encoding);
  msg_cmd->add_flag("--no-segment-embedding", msg.no_segment_embedding);

  DecodeArgs tr, ev, adv;
  auto* tr_cmd = app.add_subcommand("translate", "decode a corpus file");
  add_common(tr_cmd, tr.common);
  tr_cmd->add_option("--input", tr.input, "tab-separated source file")
      ->required();
  tr_cmd->add_option("--output", tr.output, "hypothesis file ('-' = stdout)");
  tr_cmd->add_option("--vocab", tr.vocab_path, "vocabulary file");
  tr_cmd->add_option("--beam", tr.beam);
  tr_cmd->add_option("--alpha", tr.alpha);

  auto* ev_cmd = app.add_subcommand("evaluate", "BLEU evaluation");
  add_common(ev_cmd, ev.common);
  ev_cmd->add_option("--input", ev.input, "D_m-format corpus with targets");
  ev_cmd->add_option("--vocab", ev.vocab_path, "vocabulary file");
  ev_cmd->add_option("--use-source", ev.use_source,
                     "feed only this source (1-based)");
  ev_cmd->add_option("--hyp", ev.hyp, "hypothesis file (file mode)");
  ev_cmd->add_option("--hyp-b", ev.hyp_b, "second hypothesis file");
  ev_cmd->add_option("--ref", ev.ref, "reference file (file mode)");
  ev_cmd->add_option("--bootstrap", ev.bootstrap,
                     "paired bootstrap sample count");
  ev_cmd->add_flag("--smooth", ev.smooth, "add-one smoothing");
  ev_cmd->add_option("--beam", ev.beam);
  ev_cmd->add_option("--alpha", ev.alpha);

  auto* adv_cmd =
      app.add_subcommand("adversarial-eval", "randomized-source evaluation");
  add_common(adv_cmd, adv.common);
  adv_cmd->add_option("--input", adv.input, "D_m test corpus")->required();
  adv_cmd->add_option("--vocab", adv.vocab_path, "vocabulary file");
  adv_cmd->add_option("--which", adv.which, "source index to randomize")
      ->required();
  adv_cmd->add_flag("--smooth", adv.smooth);
  adv_cmd->add_option("--beam", adv.beam);
  adv_cmd->add_option("--alpha", adv.alpha);

  AblateArgs ab;
  auto* ab_cmd =
      app.add_subcommand("ablate", "train and score the variant matrix");
  add_common(ab_cmd, ab.common);
  ab_cmd->add_option("--data", ab.data, "gen-data output directory")
      ->required();
  ab_cmd->add_option("--vocab", ab.vocab_path, "vocabulary file")->required();
  ab_cmd->add_option("--out", ab.out, "directory for variant checkpoints");
  ab_cmd->add_option("--pretrain-steps", ab.pretrain_steps);
  ab_cmd->add_option("--ssg-steps", ab.ssg_steps);
  ab_cmd->add_option("--msg-steps", ab.msg_steps);
  ab_cmd->add_flag("--fine-variants", ab.fine_variants,
                   "also run the fine-encoder variant rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen_cmd->parsed()) return run_gen_data(gen);
    if (bv_cmd->parsed()) return run_build_vocab(bv);
    if (pre_cmd->parsed())
      return run_train("pretrain", Objective::kDenoising, pre);
    if (ssg_cmd->parsed())
      return run_train("finetune-ssg", Objective::kSsg, ssg);
    if (msg_cmd->parsed())
      return run_train("finetune-msg", Objective::kMsg, msg);
    if (tr_cmd->parsed()) return run_translate(tr);
    if (ev_cmd->parsed()) return run_evaluate(ev);
    if (adv_cmd->parsed()) return run_adversarial(adv);
    if (ab_cmd->parsed()) return run_ablate(ab);
    std::cerr << "no subcommand selected\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
