#include "trice/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace trice {

std::string objective_name(Objective o) {
  switch (o) {
    case Objective::kDenoising: return "denoising";
    case Objective::kSsg: return "ssg";
    case Objective::kMsg: return "msg";
  }
  return "?";
}

Objective parse_objective(const std::string& name) {
  if (name == "denoising") return Objective::kDenoising;
  if (name == "ssg") return Objective::kSsg;
  if (name == "msg") return Objective::kMsg;
  throw ContractError("unknown objective: " + name);
}

real lr_inverse_sqrt(long step, long warmup, int d) {
  if (step < 1 || warmup < 1)
    throw ContractError("lr_inverse_sqrt: step and warmup must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  const double scale = std::pow(static_cast<double>(d), -0.5);
  return static_cast<real>(scale *
                           std::min(std::pow(s, -0.5), s * std::pow(w, -1.5)));
}

double clip_gradients(std::map<std::string, Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    const real* p = g.data();
    for (long i = 0; i < g.numel(); ++i)
      sq += static_cast<double>(p[i]) * static_cast<double>(p[i]);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const real s = static_cast<real>(max_norm / norm);
    for (auto& [name, g] : grads) {
      real* p = g.mut();
      for (long i = 0; i < g.numel(); ++i) p[i] *= s;
    }
  }
  return norm;
}

void adam_update(Parameters& params, const std::map<std::string, Tensor>& grads,
                 OptimizerState& state, real lr) {
  ++state.step;
  const double b1 = static_cast<double>(state.beta1);
  const double b2 = static_cast<double>(state.beta2);
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;  // untouched this step
    const Tensor& g = git->second;
    if (!g.same_shape(p)) throw ShapeError("adam: gradient shape mismatch");
    if (checked_mode() && !all_finite(g))
      throw NumericError("adam: non-finite gradient for " + name);
    auto mit = state.m.find(name);
    if (mit == state.m.end()) {
      mit = state.m.emplace(name, Tensor::zeros(p.shape())).first;
      state.v.emplace(name, Tensor::zeros(p.shape()));
    }
    Tensor& m = mit->second;
    Tensor& v = state.v.at(name);
    real* mp = m.mut();
    real* vp = v.mut();
    real* pp = p.mut();
    const real* gp = g.data();
    for (long i = 0; i < p.numel(); ++i) {
      mp[i] = state.beta1 * mp[i] + (real(1) - state.beta1) * gp[i];
      vp[i] = state.beta2 * vp[i] + (real(1) - state.beta2) * gp[i] * gp[i];
      const real mhat = mp[i] / static_cast<real>(bc1);
      const real vhat = vp[i] / static_cast<real>(bc2);
      pp[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

// ---- data ------------------------------------------------------------------

MultiSourceExample denoising_example(const std::vector<int>& sentence_ids,
                                     double ratio, int num_sources,
                                     std::uint64_t seed) {
  const int reserved = Vocabulary::reserved_count(num_sources);
  MultiSourceExample e;
  e.sources.push_back(corrupt_for_denoising(sentence_ids, ratio,
                                            Vocabulary::kMask, reserved, seed));
  // Reconstruct the sentence content; the language tag stays input-side.
  size_t start = 0;
  if (!sentence_ids.empty() && sentence_ids[0] >= 5 &&
      sentence_ids[0] < reserved)
    start = 1;
  e.target.push_back(Vocabulary::kBos);
  e.target.insert(e.target.end(), sentence_ids.begin() + static_cast<long>(start),
                  sentence_ids.end());
  e.target.push_back(Vocabulary::kEos);
  return e;
}

std::vector<MultiSourceExample> load_stage_examples(const Vocabulary& vocab,
                                                    Objective objective,
                                                    const std::string& path) {
  const auto lines = read_lines(path);
  std::vector<MultiSourceExample> out;
  out.reserve(lines.size());
  for (const auto& line : lines) {
    size_t arity = 1 + static_cast<size_t>(std::count(line.begin(), line.end(), '\t'));
    if (objective == Objective::kDenoising) {
      if (arity != 1)
        throw ContractError("denoising corpus must have one field per line");
      MultiSourceExample e;
      e.sources.push_back(vocab.encode(line));
      if (e.sources[0].empty()) throw ContractError("empty corpus line");
      out.push_back(std::move(e));
      continue;
    }
    if (objective == Objective::kSsg && arity != 2)
      throw ContractError("ssg corpus must have two fields per line");
    if (objective == Objective::kMsg && arity < 3)
      throw ContractError("msg corpus needs at least two sources per line");
    out.push_back(encode_example(vocab, line));
  }
  if (out.empty()) throw ContractError("empty corpus: " + path);
  return out;
}

double evaluate_loss(const Parameters& params, const ModelConfig& cfg,
                     const std::vector<MultiSourceExample>& examples,
                     long batch_tokens) {
  const auto batches = pack_batches(examples, batch_tokens, 0);
  double weighted = 0.0;
  long total = 0;
  for (const auto& idx : batches) {
    std::vector<MultiSourceExample> exs;
    exs.reserve(idx.size());
    for (int i : idx) exs.push_back(examples[static_cast<size_t>(i)]);
    Tape tape(false);
    BoundParams bound = bind_parameters(tape, params);
    Batch b = make_batch(exs, Vocabulary::kPad, batch_tokens);
    ForwardResult fr = forward_logprob(tape, bound, cfg, b);
    weighted += static_cast<double>(fr.loss.item()) *
                static_cast<double>(exs.size());
    total += static_cast<long>(exs.size());
  }
  return weighted / static_cast<double>(total);
}

// ---- stage driver ----------------------------------------------------------

namespace {

Stage stage_of(Objective o) {
  switch (o) {
    case Objective::kDenoising: return Stage::kPretrained;
    case Objective::kSsg: return Stage::kSsg;
    case Objective::kMsg: return Stage::kMsg;
  }
  return Stage::kPretrained;
}

void check_same_backbone(const ModelConfig& a, const ModelConfig& b) {
  std::string bad;
  if (a.d != b.d) bad += " d";
  if (a.heads != b.heads) bad += " heads";
  if (a.d_ff != b.d_ff) bad += " d_ff";
  if (a.n_coarse != b.n_coarse) bad += " n_coarse";
  if (a.n_decoder != b.n_decoder) bad += " n_decoder";
  if (a.vocab_size != b.vocab_size) bad += " vocab_size";
  if (a.max_len != b.max_len) bad += " max_len";
  if (!bad.empty())
    throw ContractError("architecture mismatch in:" + bad);
}

Parameters resolve_init(const StageConfig& config, const Checkpoint* init,
                        const ModelConfig& arch, ModelConfig* arch_out) {
  *arch_out = arch;
  switch (config.objective) {
    case Objective::kDenoising:
      if (!init) return init_parameters(arch, derive_seed(config.seed, 0xf2e5));
      if (init->stage != Stage::kPretrained)
        throw ContractError("denoising resume expects a pretrained checkpoint");
      check_same_backbone(init->config, arch);
      return init->params;
    case Objective::kSsg:
      if (!init) return init_parameters(arch, derive_seed(config.seed, 0xf2e5));
      if (init->stage == Stage::kMsg)
        throw ContractError("ssg training cannot start from an msg checkpoint");
      check_same_backbone(init->config, arch);
      return init->params;
    case Objective::kMsg: {
      if (!init)
        throw ContractError("msg training requires an initial checkpoint");
      if (init->stage == Stage::kMsg) {
        check_same_backbone(init->config, arch);
        return init->params;
      }
      if (init->stage == Stage::kPretrained && !config.direct)
        throw ContractError(
            "gradual pipeline violation: msg objective on a pretrained-stage "
            "checkpoint (pass direct to override)");
      Checkpoint extended = extend_to_msg(*init, arch,
                                          derive_seed(config.seed, 0xe17e),
                                          /*allow_direct=*/config.direct);
      return extended.params;
    }
  }
  throw ContractError("unreachable objective");
}

}  // namespace

Checkpoint extend_to_msg(const Checkpoint& ssg, const ModelConfig& msg_config,
                         std::uint64_t seed, bool allow_direct) {
  if (ssg.stage == Stage::kMsg)
    throw ContractError("extend_to_msg: checkpoint is already multi-source");
  if (ssg.stage == Stage::kPretrained && !allow_direct)
    throw ContractError("extend_to_msg: expected an ssg-stage checkpoint");
  msg_config.validate();
  check_same_backbone(ssg.config, msg_config);

  std::mt19937_64 rng(derive_seed(seed, 0x0f17e));
  Parameters params;
  std::string missing;
  for (const auto& [name, shape] : parameter_specs(msg_config)) {
    if (is_fine_encoder_param(name)) {
      // Fresh fine-encoder tensors, drawn in canonical name order.
      Tensor t(shape);
      init_parameter_tensor(t, name, rng);
      params.emplace(name, std::move(t));
    } else {
      auto it = ssg.params.find(name);
      if (it == ssg.params.end() || it->second.shape() != shape) {
        missing += missing.empty() ? name : (", " + name);
        continue;
      }
      params.emplace(name, it->second);  // bitwise carry-over (shared buffer)
    }
  }
  if (!missing.empty())
    throw ContractError("extend_to_msg: architecture mismatch for: " + missing);

  Checkpoint out;
  out.config = msg_config;
  out.params = std::move(params);
  out.stage = Stage::kMsg;
  out.step = 0;
  std::ostringstream rs;
  rs << rng;
  out.rng_state = rs.str();
  return out;
}

Checkpoint train_stage(const StageConfig& config, const Checkpoint* init,
                       const Vocabulary& vocab, const ModelConfig& arch,
                       const TrainLogger& log) {
  arch.validate();
  ModelConfig cfg;
  Parameters params = resolve_init(config, init, arch, &cfg);

  auto train = load_stage_examples(vocab, config.objective, config.train_path);
  std::vector<MultiSourceExample> dev;
  if (!config.dev_path.empty())
    dev = load_stage_examples(vocab, config.objective, config.dev_path);
  if (config.objective == Objective::kDenoising) {
    // Dev corruption is fixed once so dev losses stay comparable.
    for (size_t i = 0; i < dev.size(); ++i)
      dev[i] = denoising_example(dev[i].sources[0], config.corruption_ratio,
                                 cfg.num_sources,
                                 derive_seed(config.seed, 0xdead00 + i));
  }

  OptimizerState opt;
  std::mt19937_64 rng(derive_seed(config.seed, 0x7a17));
  Parameters best_params = params;
  double best_dev = std::numeric_limits<double>::infinity();
  bool have_dev = !dev.empty();

  long step = 0;
  long epoch = 0;
  const bool freeze = config.freeze == FreezePolicy::kFreezePretrained;

  auto run_dev_eval = [&](double train_loss) {
    double dev_loss = std::numeric_limits<double>::quiet_NaN();
    if (have_dev) {
      dev_loss = evaluate_loss(params, cfg, dev, config.batch_tokens);
      if (dev_loss < best_dev) {
        best_dev = dev_loss;
        best_params = params;  // cheap snapshot; buffers copy on write
      }
    }
    if (log)
      log({step, train_loss, dev_loss,
           static_cast<double>(config.lr_scale *
                               lr_inverse_sqrt(std::max(step, 1L),
                                               config.warmup, cfg.d))});
  };

  // Denoising corrupts per epoch, so batches are packed against the
  // worst-case shape: the uncorrupted source plus a bos...eos target.
  std::vector<MultiSourceExample> pack_view = train;
  if (config.objective == Objective::kDenoising) {
    for (auto& e : pack_view)
      e.target.assign(e.sources[0].size() + 2, Vocabulary::kBos);
  }

  while (step < config.max_steps) {
    ++epoch;
    const auto batches = pack_batches(pack_view, config.batch_tokens,
                                      derive_seed(config.seed, epoch));
    for (const auto& idx : batches) {
      std::vector<MultiSourceExample> exs;
      exs.reserve(idx.size());
      for (int i : idx) {
        if (config.objective == Objective::kDenoising) {
          exs.push_back(denoising_example(
              train[static_cast<size_t>(i)].sources[0],
              config.corruption_ratio, cfg.num_sources,
              derive_seed(config.seed,
                          0xc0de0000ull + static_cast<std::uint64_t>(epoch) *
                                              1000003ull +
                          static_cast<std::uint64_t>(i))));
        } else {
          exs.push_back(train[static_cast<size_t>(i)]);
        }
      }
      Batch b = make_batch(exs, Vocabulary::kPad, config.batch_tokens);
      Tape tape(true);
      BoundParams bound = bind_parameters(tape, params);
      ForwardOptions fo;
      fo.dropout = config.dropout;
      fo.dropout_seed = derive_seed(config.seed, 0xd0ull + static_cast<std::uint64_t>(step));
      ForwardResult fr = forward_logprob(tape, bound, cfg, b, fo);
      const double loss = static_cast<double>(fr.loss.item());
      if (!std::isfinite(loss))
        throw NumericError("training diverged: non-finite loss at step " +
                           std::to_string(step));
      GradMap gm = tape.backward(fr.loss);
      auto grads = grads_by_name(bound, gm);
      if (freeze) {
        for (auto it = grads.begin(); it != grads.end();)
          it = is_fine_encoder_param(it->first) ? std::next(it)
                                                : grads.erase(it);
      }
      clip_gradients(grads, config.clip_norm);
      const real lr = config.lr_scale *
                      lr_inverse_sqrt(step + 1, config.warmup, cfg.d);
      adam_update(params, grads, opt, lr);
      ++step;
      if (step % config.eval_every == 0 || step >= config.max_steps)
        run_dev_eval(loss);
      if (step >= config.max_steps) break;
    }
  }
  if (!have_dev) best_params = params;

  Checkpoint out;
  out.config = cfg;
  out.params = have_dev ? best_params : params;
  out.stage = stage_of(config.objective);
  out.step = step;
  std::ostringstream rs;
  rs << rng;
  out.rng_state = rs.str();
  return out;
}

}  // namespace trice
