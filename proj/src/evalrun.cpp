#include "trice/evalrun.hpp"

#include <random>
#include <sstream>

namespace trice {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream ss(line);
  std::string f;
  while (std::getline(ss, f, '\t')) fields.push_back(f);
  return fields;
}

namespace {

std::vector<std::vector<int>> encode_sources_only(
    const Vocabulary& vocab, const ModelConfig& cfg,
    const std::vector<std::string>& fields, int use_source) {
  std::vector<std::vector<int>> sources;
  const size_t n_src =
      fields.size() > 1 ? fields.size() - 1 : fields.size();
  if (use_source > 0) {
    if (static_cast<size_t>(use_source) > n_src)
      throw ContractError("use_source exceeds source count");
    sources.push_back(vocab.encode(fields[static_cast<size_t>(use_source) - 1]));
  } else {
    for (size_t k = 0; k < n_src; ++k)
      sources.push_back(vocab.encode(fields[k]));
  }
  if (static_cast<int>(sources.size()) != cfg.num_sources)
    throw ContractError("corpus arity does not match model num_sources");
  for (auto& s : sources)
    if (static_cast<int>(s.size()) > cfg.max_len)
      s.resize(static_cast<size_t>(cfg.max_len));
  return sources;
}

std::vector<std::string> decode_all(
    const Parameters& params, const ModelConfig& cfg, const Vocabulary& vocab,
    const std::vector<std::vector<std::vector<int>>>& inputs,
    const DecodeOptions& opts) {
  const int max_len = opts.max_len > 0 ? opts.max_len : cfg.max_len;
  std::vector<std::string> out(inputs.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) if (opts.parallel)
  for (long i = 0; i < static_cast<long>(inputs.size()); ++i) {
    try {
      Hypothesis h = decode_sentence(params, cfg, inputs[static_cast<size_t>(i)],
                                     opts.beam, opts.alpha, max_len);
      std::vector<int> ids = h.tokens;
      if (!ids.empty() && ids.back() == Vocabulary::kEos) ids.pop_back();
      out[static_cast<size_t>(i)] = vocab.decode(ids);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace

std::vector<std::string> translate_corpus(
    const Parameters& params, const ModelConfig& cfg, const Vocabulary& vocab,
    const std::vector<std::string>& lines, const DecodeOptions& opts) {
  std::vector<std::vector<std::vector<int>>> inputs;
  inputs.reserve(lines.size());
  for (const auto& line : lines)
    inputs.push_back(encode_sources_only(vocab, cfg, split_fields(line), 0));
  return decode_all(params, cfg, vocab, inputs, opts);
}

EvalReport evaluate_corpus(const Parameters& params, const ModelConfig& cfg,
                           const Vocabulary& vocab,
                           const std::vector<std::string>& lines,
                           const DecodeOptions& opts, int use_source,
                           bool smooth) {
  std::vector<std::vector<std::vector<int>>> inputs;
  std::vector<std::string> refs;
  for (const auto& line : lines) {
    const auto fields = split_fields(line);
    if (fields.size() < 2)
      throw ContractError("evaluate: corpus line lacks a target field");
    inputs.push_back(encode_sources_only(vocab, cfg, fields, use_source));
    refs.push_back(fields.back());
  }
  const auto hyps = decode_all(params, cfg, vocab, inputs, opts);
  EvalReport rep = corpus_bleu(hyps, refs, smooth);

  // Teacher-forced token accuracy over the same corpus.
  double acc_sum = 0.0;
  long acc_n = 0;
  for (size_t i = 0; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    MultiSourceExample e;
    e.sources = inputs[i];
    auto tgt = vocab.encode(fields.back());
    if (static_cast<int>(tgt.size()) + 2 > cfg.max_len)
      tgt.resize(static_cast<size_t>(cfg.max_len) - 2);
    e.target.push_back(Vocabulary::kBos);
    e.target.insert(e.target.end(), tgt.begin(), tgt.end());
    e.target.push_back(Vocabulary::kEos);
    Tape tape(false);
    BoundParams bound = bind_parameters(tape, params);
    Batch b = make_batch({e}, Vocabulary::kPad, 1L << 30);
    ForwardResult fr = forward_logprob(tape, bound, cfg, b);
    acc_sum += fr.token_accuracy * static_cast<double>(e.target.size() - 1);
    acc_n += static_cast<long>(e.target.size()) - 1;
  }
  if (acc_n > 0) rep.token_accuracy = acc_sum / static_cast<double>(acc_n);
  return rep;
}

AdversarialResult adversarial_eval(const Parameters& params,
                                   const ModelConfig& cfg,
                                   const Vocabulary& vocab,
                                   const std::vector<std::string>& lines,
                                   int which, std::uint64_t seed,
                                   const DecodeOptions& opts, bool smooth) {
  if (lines.size() < 2)
    throw ContractError("adversarial_eval: need at least two examples");
  if (which < 1 || which > cfg.num_sources)
    throw ContractError("adversarial_eval: source index out of range");

  std::vector<std::string> randomized;
  randomized.reserve(lines.size());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, lines.size() - 2);
  for (size_t i = 0; i < lines.size(); ++i) {
    auto fields = split_fields(lines[i]);
    if (fields.size() < 2)
      throw ContractError("adversarial_eval: corpus line lacks a target");
    size_t j = pick(rng);
    if (j >= i) ++j;  // uniform over the other examples
    const auto donor = split_fields(lines[j]);
    fields[static_cast<size_t>(which - 1)] =
        donor[static_cast<size_t>(which - 1)];
    std::string line;
    for (size_t k = 0; k < fields.size(); ++k) {
      if (k) line += '\t';
      line += fields[k];
    }
    randomized.push_back(std::move(line));
  }

  AdversarialResult res;
  res.normal = evaluate_corpus(params, cfg, vocab, lines, opts, 0, smooth);
  res.randomized =
      evaluate_corpus(params, cfg, vocab, randomized, opts, 0, smooth);
  res.delta = res.normal.bleu - res.randomized.bleu;
  return res;
}

}  // namespace trice
