#include "trice/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace trice {

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::kPretrained: return "pretrained";
    case Stage::kSsg: return "ssg";
    case Stage::kMsg: return "msg";
  }
  return "?";
}

Stage parse_stage(const std::string& name) {
  if (name == "pretrained") return Stage::kPretrained;
  if (name == "ssg") return Stage::kSsg;
  if (name == "msg") return Stage::kMsg;
  throw ContractError("unknown stage: " + name);
}

void ModelConfig::validate() const {
  if (d < 1 || heads < 1 || d % heads != 0)
    throw ContractError("config: d must be a positive multiple of heads");
  if (n_coarse < 1 || n_decoder < 1 || n_fine < 0)
    throw ContractError("config: need n_coarse >= 1, n_decoder >= 1, n_fine >= 0");
  if (num_sources < 1) throw ContractError("config: num_sources >= 1");
  if (vocab_size < 6) throw ContractError("config: vocabulary not set");
  if (max_len < 2) throw ContractError("config: max_len too small");
  if (d_ff < 1) throw ContractError("config: d_ff >= 1");
}

ModelConfig ModelConfig::ssg_variant() const {
  ModelConfig c = *this;
  c.num_sources = 1;
  c.use_fine_encoder = false;
  c.use_segment_embedding = false;
  return c;
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  kv["d"] = std::to_string(d);
  kv["heads"] = std::to_string(heads);
  kv["d_ff"] = std::to_string(d_ff);
  kv["n_coarse"] = std::to_string(n_coarse);
  kv["n_fine"] = std::to_string(n_fine);
  kv["n_decoder"] = std::to_string(n_decoder);
  kv["num_sources"] = std::to_string(num_sources);
  kv["vocab_size"] = std::to_string(vocab_size);
  kv["max_len"] = std::to_string(max_len);
  kv["use_fine_encoder"] = use_fine_encoder ? "1" : "0";
  kv["fine_encoder_cross_attention"] = fine_encoder_cross_attention ? "1" : "0";
  kv["separated_decoder_cross_attention"] =
      separated_decoder_cross_attention ? "1" : "0";
  kv["use_segment_embedding"] = use_segment_embedding ? "1" : "0";
  kv["concatenated_encoding"] = concatenated_encoding ? "1" : "0";
  return kv;
}

ModelConfig ModelConfig::from_kv(
    const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  const auto geti = [&kv](const char* key, int dflt) {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : std::stoi(it->second);
  };
  c.d = geti("d", c.d);
  c.heads = geti("heads", c.heads);
  c.d_ff = geti("d_ff", c.d_ff);
  c.n_coarse = geti("n_coarse", c.n_coarse);
  c.n_fine = geti("n_fine", c.n_fine);
  c.n_decoder = geti("n_decoder", c.n_decoder);
  c.num_sources = geti("num_sources", c.num_sources);
  c.vocab_size = geti("vocab_size", c.vocab_size);
  c.max_len = geti("max_len", c.max_len);
  c.use_fine_encoder = geti("use_fine_encoder", 1) != 0;
  c.fine_encoder_cross_attention = geti("fine_encoder_cross_attention", 1) != 0;
  c.separated_decoder_cross_attention =
      geti("separated_decoder_cross_attention", 1) != 0;
  c.use_segment_embedding = geti("use_segment_embedding", 1) != 0;
  c.concatenated_encoding = geti("concatenated_encoding", 1) != 0;
  return c;
}

// ---- parameter table -------------------------------------------------------

namespace {

void push_attention_specs(
    std::vector<std::pair<std::string, std::vector<int>>>& out,
    const std::string& prefix, int d) {
  out.push_back({prefix + ".wq", {d, d}});
  out.push_back({prefix + ".bq", {d}});
  out.push_back({prefix + ".wk", {d, d}});
  out.push_back({prefix + ".bk", {d}});
  out.push_back({prefix + ".wv", {d, d}});
  out.push_back({prefix + ".bv", {d}});
  out.push_back({prefix + ".wo", {d, d}});
  out.push_back({prefix + ".bo", {d}});
}

void push_ln_specs(std::vector<std::pair<std::string, std::vector<int>>>& out,
                   const std::string& prefix, int d) {
  out.push_back({prefix + ".gain", {d}});
  out.push_back({prefix + ".bias", {d}});
}

void push_ffn_specs(std::vector<std::pair<std::string, std::vector<int>>>& out,
                    const std::string& prefix, int d, int d_ff) {
  out.push_back({prefix + ".w1", {d, d_ff}});
  out.push_back({prefix + ".b1", {d_ff}});
  out.push_back({prefix + ".w2", {d_ff, d}});
  out.push_back({prefix + ".b2", {d}});
}

}  // namespace

std::vector<std::pair<std::string, std::vector<int>>> parameter_specs(
    const ModelConfig& cfg) {
  std::vector<std::pair<std::string, std::vector<int>>> out;
  out.push_back({"embed.tok", {cfg.vocab_size, cfg.d}});
  out.push_back({"embed.pos", {cfg.max_len, cfg.d}});
  for (int i = 0; i < cfg.n_coarse; ++i) {
    const std::string p = "coarse." + std::to_string(i);
    push_attention_specs(out, p + ".attn", cfg.d);
    push_ln_specs(out, p + ".ln1", cfg.d);
    push_ffn_specs(out, p + ".ffn", cfg.d, cfg.d_ff);
    push_ln_specs(out, p + ".ln2", cfg.d);
  }
  for (int i = 0; i < cfg.effective_n_fine(); ++i) {
    const std::string p = "fine." + std::to_string(i);
    push_attention_specs(out, p + ".self_attn", cfg.d);
    push_ln_specs(out, p + ".ln1", cfg.d);
    if (cfg.fine_encoder_cross_attention) {
      push_attention_specs(out, p + ".cross_attn", cfg.d);
      push_ln_specs(out, p + ".ln2", cfg.d);
    }
    push_ffn_specs(out, p + ".ffn", cfg.d, cfg.d_ff);
    push_ln_specs(out, p + ".ln3", cfg.d);
  }
  for (int i = 0; i < cfg.n_decoder; ++i) {
    const std::string p = "decoder." + std::to_string(i);
    push_attention_specs(out, p + ".self_attn", cfg.d);
    push_ln_specs(out, p + ".ln1", cfg.d);
    push_attention_specs(out, p + ".cross_attn", cfg.d);
    push_ln_specs(out, p + ".ln2", cfg.d);
    push_ffn_specs(out, p + ".ffn", cfg.d, cfg.d_ff);
    push_ln_specs(out, p + ".ln3", cfg.d);
  }
  return out;
}

bool is_fine_encoder_param(const std::string& name) {
  return name.rfind("fine.", 0) == 0;
}

namespace {

bool is_ln_gain(const std::string& name) {
  return name.size() >= 5 && name.compare(name.size() - 5, 5, ".gain") == 0;
}

bool is_bias_like(const std::string& name) {
  if (name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0)
    return true;
  const auto dot = name.rfind('.');
  if (dot == std::string::npos) return false;
  const std::string leaf = name.substr(dot + 1);
  return leaf.size() == 2 && leaf[0] == 'b';
}

real trunc_normal(std::mt19937_64& rng, real stddev) {
  std::normal_distribution<double> n(0.0, static_cast<double>(stddev));
  for (;;) {
    const double v = n(rng);
    if (std::abs(v) <= 2.0 * static_cast<double>(stddev))
      return static_cast<real>(v);
  }
}

}  // namespace

void init_parameter_tensor(Tensor& t, const std::string& name,
                           std::mt19937_64& rng) {
  real* p = t.mut();
  if (is_ln_gain(name)) {
    for (long i = 0; i < t.numel(); ++i) p[i] = real(1);
  } else if (is_bias_like(name)) {
    for (long i = 0; i < t.numel(); ++i) p[i] = real(0);
  } else {
    for (long i = 0; i < t.numel(); ++i) p[i] = trunc_normal(rng, real(0.02));
  }
}

Parameters init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x70a7a));
  Parameters params;
  for (const auto& [name, shape] : parameter_specs(cfg)) {
    Tensor t(shape);
    init_parameter_tensor(t, name, rng);
    params.emplace(name, std::move(t));
  }
  return params;
}

const Tensor& BoundParams::operator()(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end())
    throw ContractError("unknown parameter name: " + name);
  return it->second;
}

BoundParams bind_parameters(Tape& tape, const Parameters& params) {
  BoundParams bound;
  for (const auto& [name, tensor] : params)
    bound.tensors.emplace(name, tape.leaf(tensor));
  return bound;
}

std::map<std::string, Tensor> grads_by_name(const BoundParams& bound,
                                            const GradMap& grads) {
  std::map<std::string, Tensor> out;
  for (const auto& [name, tensor] : bound.tensors) {
    if (tensor.node < 0 ||
        tensor.node >= static_cast<int>(grads.size()))
      continue;
    const Tensor& g = grads[static_cast<size_t>(tensor.node)];
    if (g.defined()) out.emplace(name, g);
  }
  return out;
}

AttentionParams attention_params(const BoundParams& bound,
                                 const std::string& prefix, int heads) {
  AttentionParams p;
  p.wq = bound(prefix + ".wq");
  p.bq = bound(prefix + ".bq");
  p.wk = bound(prefix + ".wk");
  p.bk = bound(prefix + ".bk");
  p.wv = bound(prefix + ".wv");
  p.bv = bound(prefix + ".bv");
  p.wo = bound(prefix + ".wo");
  p.bo = bound(prefix + ".bo");
  p.heads = heads;
  return p;
}

// ---- attention core --------------------------------------------------------

namespace {

struct RowSpan {
  int off = 0;
  int len = 0;
};

struct AttnSpan {
  RowSpan q;
  std::vector<RowSpan> kv;
  bool causal = false;
};

/// Lower-triangular-inclusive 0/1 keep mask, cached per length.
const Tensor& causal_mask(int len) {
  thread_local std::map<int, Tensor> cache;
  auto it = cache.find(len);
  if (it != cache.end()) return it->second;
  Tensor m({len, len});
  real* p = m.mut();
  for (int i = 0; i < len; ++i)
    for (int j = 0; j <= i; ++j) p[static_cast<long>(i) * len + j] = real(1);
  return cache.emplace(len, std::move(m)).first->second;
}

/// Multi-head attention over packed rows. Query projections come from
/// `q_rows`, key/value projections from `kv_rows`; each span attends
/// independently. Output rows follow the span order, one block per span.
Tensor packed_attention(Tape& tape, const Tensor& q_rows,
                        const Tensor& kv_rows,
                        const std::vector<AttnSpan>& spans,
                        const AttentionParams& p) {
  const int d = q_rows.cols();
  if (d != p.wq.rows()) throw ShapeError("attention: width mismatch");
  if (d % p.heads != 0) throw ShapeError("attention: heads must divide d");
  const int dk = d / p.heads;
  const real inv_sqrt_dk = real(1) / std::sqrt(static_cast<real>(dk));

  Tensor q_all = ops::add_rowvec(tape, ops::matmul(tape, q_rows, p.wq), p.bq);
  Tensor k_all = ops::add_rowvec(tape, ops::matmul(tape, kv_rows, p.wk), p.bk);
  Tensor v_all = ops::add_rowvec(tape, ops::matmul(tape, kv_rows, p.wv), p.bv);

  std::vector<Tensor> span_ctx;
  span_ctx.reserve(spans.size());
  for (const AttnSpan& s : spans) {
    std::vector<Tensor> head_ctx;
    head_ctx.reserve(static_cast<size_t>(p.heads));
    for (int h = 0; h < p.heads; ++h) {
      const int c0 = h * dk, c1 = (h + 1) * dk;
      Tensor qh = ops::block(tape, q_all, s.q.off, s.q.off + s.q.len, c0, c1);
      Tensor kh, vh;
      if (s.kv.size() == 1) {
        const RowSpan& r = s.kv[0];
        kh = ops::block(tape, k_all, r.off, r.off + r.len, c0, c1);
        vh = ops::block(tape, v_all, r.off, r.off + r.len, c0, c1);
      } else {
        std::vector<Tensor> kparts, vparts;
        for (const RowSpan& r : s.kv) {
          kparts.push_back(
              ops::block(tape, k_all, r.off, r.off + r.len, c0, c1));
          vparts.push_back(
              ops::block(tape, v_all, r.off, r.off + r.len, c0, c1));
        }
        kh = ops::concat_rows(tape, kparts);
        vh = ops::concat_rows(tape, vparts);
      }
      Tensor scores =
          ops::scale(tape, ops::matmul_nt(tape, qh, kh), inv_sqrt_dk);
      const Tensor* mask = nullptr;
      if (s.causal) {
        if (scores.rows() != scores.cols())
          throw ShapeError("attention: causal span must be square");
        mask = &causal_mask(s.q.len);
      }
      Tensor attn = ops::softmax_rows(tape, scores, mask);
      head_ctx.push_back(ops::matmul(tape, attn, vh));
    }
    span_ctx.push_back(ops::concat_cols(tape, head_ctx));
  }
  Tensor ctx = span_ctx.size() == 1 ? span_ctx[0]
                                    : ops::concat_rows(tape, span_ctx);
  return ops::add_rowvec(tape, ops::matmul(tape, ctx, p.wo), p.bo);
}

Tensor sublayer_out(Tape& tape, const BoundParams& bound,
                    const std::string& ln_prefix, const Tensor& x,
                    const Tensor& sub, const ForwardOptions& opts,
                    std::uint64_t drop_salt) {
  Tensor s = sub;
  if (opts.dropout > real(0))
    s = ops::dropout(tape, s, opts.dropout,
                     derive_seed(opts.dropout_seed, drop_salt));
  return ops::layer_norm(tape, ops::add(tape, x, s),
                         bound(ln_prefix + ".gain"), bound(ln_prefix + ".bias"),
                         real(1e-5));
}

Tensor ffn_block(Tape& tape, const BoundParams& bound,
                 const std::string& prefix, const Tensor& x) {
  Tensor h = ops::add_rowvec(tape, ops::matmul(tape, x, bound(prefix + ".w1")),
                             bound(prefix + ".b1"));
  h = ops::gelu(tape, h);
  return ops::add_rowvec(tape, ops::matmul(tape, h, bound(prefix + ".w2")),
                         bound(prefix + ".b2"));
}

Tensor encoder_layer_packed(Tape& tape, const BoundParams& bound,
                            const ModelConfig& cfg, const std::string& prefix,
                            const Tensor& x, const std::vector<AttnSpan>& spans,
                            const ForwardOptions& opts, std::uint64_t salt) {
  const auto attn = attention_params(bound, prefix + ".attn", cfg.heads);
  Tensor a = packed_attention(tape, x, x, spans, attn);
  Tensor x1 = sublayer_out(tape, bound, prefix + ".ln1", x, a, opts, salt);
  Tensor f = ffn_block(tape, bound, prefix + ".ffn", x1);
  return sublayer_out(tape, bound, prefix + ".ln2", x1, f, opts, salt + 1);
}

std::vector<AttnSpan> self_spans(const std::vector<RowSpan>& rows,
                                 bool causal = false) {
  std::vector<AttnSpan> spans;
  spans.reserve(rows.size());
  for (const RowSpan& r : rows) spans.push_back({r, {r}, causal});
  return spans;
}

}  // namespace

// ---- public building blocks ------------------------------------------------

Tensor segment_embedding(int k, int d) {
  if (k < 0) throw ContractError("segment_embedding: k >= 0");
  Tensor e({d});
  real* p = e.mut();
  for (int i = 0; 2 * i < d; ++i) {
    const double angle = 1000.0 * static_cast<double>(k) /
                         std::pow(10000.0, 2.0 * i / static_cast<double>(d));
    p[2 * i] = static_cast<real>(std::sin(angle));
    if (2 * i + 1 < d) p[2 * i + 1] = static_cast<real>(std::cos(angle));
  }
  return e;
}

Tensor multi_head_attention(Tape& tape, const Tensor& q, const Tensor& k,
                            const Tensor& v, const Tensor* keep_mask,
                            const AttentionParams& p) {
  const int d = q.cols();
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows())
    throw ShapeError("multi_head_attention: shape mismatch");
  if (keep_mask &&
      (keep_mask->rows() != q.rows() || keep_mask->cols() != k.rows()))
    throw ShapeError("multi_head_attention: mask shape mismatch");
  const int dk = d / p.heads;
  const real inv_sqrt_dk = real(1) / std::sqrt(static_cast<real>(dk));
  Tensor qp = ops::add_rowvec(tape, ops::matmul(tape, q, p.wq), p.bq);
  Tensor kp = ops::add_rowvec(tape, ops::matmul(tape, k, p.wk), p.bk);
  Tensor vp = ops::add_rowvec(tape, ops::matmul(tape, v, p.wv), p.bv);
  std::vector<Tensor> heads;
  heads.reserve(static_cast<size_t>(p.heads));
  for (int h = 0; h < p.heads; ++h) {
    const int c0 = h * dk, c1 = (h + 1) * dk;
    Tensor qh = ops::block(tape, qp, 0, qp.rows(), c0, c1);
    Tensor kh = ops::block(tape, kp, 0, kp.rows(), c0, c1);
    Tensor vh = ops::block(tape, vp, 0, vp.rows(), c0, c1);
    Tensor scores = ops::scale(tape, ops::matmul_nt(tape, qh, kh), inv_sqrt_dk);
    Tensor attn = ops::softmax_rows(tape, scores, keep_mask);
    heads.push_back(ops::matmul(tape, attn, vh));
  }
  Tensor ctx = ops::concat_cols(tape, heads);
  return ops::add_rowvec(tape, ops::matmul(tape, ctx, p.wo), p.bo);
}

Tensor input_representation(Tape& tape, const BoundParams& bound,
                            const ModelConfig& cfg,
                            const std::vector<std::vector<int>>& sources) {
  if (sources.empty()) throw ContractError("input_representation: no sources");
  std::vector<int> tok_ids, pos_ids;
  std::vector<real> seg_rows;
  for (size_t k = 0; k < sources.size(); ++k) {
    const auto& s = sources[k];
    if (static_cast<int>(s.size()) > cfg.max_len)
      throw ContractError("input_representation: source exceeds max_len");
    Tensor seg;
    if (cfg.use_segment_embedding)
      seg = segment_embedding(static_cast<int>(k) + 1, cfg.d);
    for (size_t i = 0; i < s.size(); ++i) {
      tok_ids.push_back(s[i]);
      pos_ids.push_back(static_cast<int>(i));  // positions restart per source
      if (cfg.use_segment_embedding)
        seg_rows.insert(seg_rows.end(), seg.data(), seg.data() + cfg.d);
    }
  }
  Tensor x = ops::add(
      tape, ops::embedding_lookup(tape, bound("embed.tok"), tok_ids),
      ops::embedding_lookup(tape, bound("embed.pos"), pos_ids));
  if (cfg.use_segment_embedding) {
    Tensor seg({static_cast<int>(tok_ids.size()), cfg.d}, std::move(seg_rows));
    x = ops::add(tape, x, seg);
  }
  return x;
}

namespace {

std::vector<AttnSpan> coarse_spans(const ModelConfig& cfg, int off,
                                   const std::vector<int>& source_lengths) {
  std::vector<AttnSpan> spans;
  if (cfg.concatenated_encoding) {
    int total = 0;
    for (int l : source_lengths) total += l;
    spans.push_back({{off, total}, {{off, total}}, false});
  } else {
    int o = off;
    for (int l : source_lengths) {
      spans.push_back({{o, l}, {{o, l}}, false});
      o += l;
    }
  }
  return spans;
}

}  // namespace

Tensor coarse_encode(Tape& tape, const BoundParams& bound,
                     const ModelConfig& cfg, const Tensor& x,
                     const std::vector<int>& source_lengths) {
  int total = 0;
  for (int l : source_lengths) total += l;
  if (total != x.rows())
    throw ShapeError("coarse_encode: lengths do not cover the input");
  const auto spans = coarse_spans(cfg, 0, source_lengths);
  Tensor r = x;
  for (int i = 0; i < cfg.n_coarse; ++i)
    r = encoder_layer_packed(tape, bound, cfg, "coarse." + std::to_string(i),
                             r, spans, {}, 0);
  return r;
}

std::vector<Tensor> split_sources(Tape& tape, const Tensor& r,
                                  const std::vector<int>& lengths) {
  int total = 0;
  for (int l : lengths) total += l;
  if (total != r.rows())
    throw ShapeError("split_sources: lengths do not sum to row count");
  std::vector<Tensor> out;
  int off = 0;
  for (int l : lengths) {
    out.push_back(ops::slice_rows(tape, r, off, off + l));
    off += l;
  }
  return out;
}

std::vector<Tensor> fine_encoder_layer(Tape& tape, const BoundParams& bound,
                                       const ModelConfig& cfg, int layer,
                                       const std::vector<Tensor>& a) {
  const std::string p = "fine." + std::to_string(layer);
  const size_t K = a.size();
  if (K == 0) throw ContractError("fine_encoder_layer: no sources");
  const auto self_p = attention_params(bound, p + ".self_attn", cfg.heads);

  std::vector<Tensor> b(K);
  for (size_t k = 0; k < K; ++k) {
    Tensor att = packed_attention(tape, a[k], a[k],
                                  self_spans({{0, a[k].rows()}}), self_p);
    b[k] = sublayer_out(tape, bound, p + ".ln1", a[k], att, {}, 0);
  }

  std::vector<Tensor> c(K);
  if (cfg.fine_encoder_cross_attention && K > 1) {
    const auto cross_p = attention_params(bound, p + ".cross_attn", cfg.heads);
    for (size_t k = 0; k < K; ++k) {
      std::vector<Tensor> others;
      for (size_t j = 0; j < K; ++j)
        if (j != k) others.push_back(b[j]);
      Tensor o = others.size() == 1 ? others[0]
                                    : ops::concat_rows(tape, others);
      Tensor att = packed_attention(
          tape, b[k], o, {{{0, b[k].rows()}, {{0, o.rows()}}, false}}, cross_p);
      c[k] = sublayer_out(tape, bound, p + ".ln2", b[k], att, {}, 0);
    }
  } else {
    // Cross-attention off (ablation) or nothing to attend to (K == 1).
    c = b;
  }

  std::vector<Tensor> out(K);
  for (size_t k = 0; k < K; ++k) {
    Tensor f = ffn_block(tape, bound, p + ".ffn", c[k]);
    out[k] = sublayer_out(tape, bound, p + ".ln3", c[k], f, {}, 0);
  }
  return out;
}

std::vector<Tensor> fine_encode(Tape& tape, const BoundParams& bound,
                                const ModelConfig& cfg,
                                const std::vector<Tensor>& r) {
  std::vector<Tensor> a = r;
  for (int i = 0; i < cfg.effective_n_fine(); ++i)
    a = fine_encoder_layer(tape, bound, cfg, i, a);
  return a;
}

Tensor decoder_layer(Tape& tape, const BoundParams& bound,
                     const ModelConfig& cfg, int layer, const Tensor& g,
                     const std::vector<Tensor>& enc) {
  const std::string p = "decoder." + std::to_string(layer);
  const size_t K = enc.size();
  if (K == 0) throw ContractError("decoder_layer: no encoder outputs");
  const auto self_p = attention_params(bound, p + ".self_attn", cfg.heads);
  Tensor sa = packed_attention(tape, g, g,
                               self_spans({{0, g.rows()}}, true), self_p);
  Tensor g1 = sublayer_out(tape, bound, p + ".ln1", g, sa, {}, 0);

  const auto cross_p = attention_params(bound, p + ".cross_attn", cfg.heads);
  Tensor h;
  if (cfg.separated_decoder_cross_attention) {
    // One shared parameter set applied per source; outputs mean-pooled.
    std::vector<Tensor> per_source;
    per_source.reserve(K);
    for (const Tensor& e : enc)
      per_source.push_back(packed_attention(
          tape, g1, e, {{{0, g1.rows()}, {{0, e.rows()}}, false}}, cross_p));
    h = per_source.size() == 1
            ? per_source[0]
            : ops::scale(tape, ops::add_n(tape, per_source),
                         real(1) / static_cast<real>(K));
  } else {
    Tensor cat = K == 1 ? enc[0] : ops::concat_rows(tape, enc);
    h = packed_attention(tape, g1, cat,
                         {{{0, g1.rows()}, {{0, cat.rows()}}, false}}, cross_p);
  }
  Tensor g2 = sublayer_out(tape, bound, p + ".ln2", g1, h, {}, 0);
  Tensor f = ffn_block(tape, bound, p + ".ffn", g2);
  return sublayer_out(tape, bound, p + ".ln3", g2, f, {}, 0);
}

// ---- full teacher-forced pass ----------------------------------------------

namespace {

struct ExampleView {
  std::vector<std::vector<int>> sources;  // unpadded
  std::vector<int> target;                // unpadded, bos...eos
};

std::vector<ExampleView> unpack_batch(const Batch& batch,
                                      const ModelConfig& cfg) {
  const auto& sb = batch.sources;
  if (sb.num_sources != cfg.num_sources)
    throw ContractError("forward: batch arity does not match num_sources");
  const size_t B = batch.targets.ids.size();
  std::vector<ExampleView> out(B);
  for (size_t e = 0; e < B; ++e) {
    for (int k = 0; k < sb.num_sources; ++k) {
      const int len = sb.lengths[static_cast<size_t>(k)][e];
      const auto& row = sb.ids[static_cast<size_t>(k)][e];
      if (len < 1 || len > cfg.max_len)
        throw ContractError("forward: source length out of range");
      out[e].sources.emplace_back(row.begin(), row.begin() + len);
    }
    const int tlen = batch.targets.lengths[e];
    const auto& trow = batch.targets.ids[e];
    if (tlen < 2) throw ContractError("forward: empty target");
    if (tlen > cfg.max_len)
      throw ContractError("forward: target length out of range");
    out[e].target.assign(trow.begin(), trow.begin() + tlen);
    if (out[e].target.front() != Vocabulary::kBos ||
        out[e].target.back() != Vocabulary::kEos)
      throw ContractError("forward: target must be bos ... eos");
  }
  return out;
}

}  // namespace

ForwardResult forward_logprob(Tape& tape, const BoundParams& bound,
                              const ModelConfig& cfg, const Batch& batch,
                              const ForwardOptions& opts) {
  const auto examples = unpack_batch(batch, cfg);
  const size_t B = examples.size();
  if (B == 0) throw ContractError("forward: empty batch");

  // Packed source rows: per example, sources concatenated in order.
  std::vector<int> src_tok, src_pos;
  std::vector<real> seg_rows;
  std::vector<RowSpan> ex_span(B);
  std::vector<std::vector<RowSpan>> src_span(B);
  std::vector<std::vector<int>> src_lengths(B);
  int off = 0;
  for (size_t e = 0; e < B; ++e) {
    ex_span[e].off = off;
    for (size_t k = 0; k < examples[e].sources.size(); ++k) {
      const auto& s = examples[e].sources[k];
      src_span[e].push_back({off, static_cast<int>(s.size())});
      src_lengths[e].push_back(static_cast<int>(s.size()));
      Tensor seg;
      if (cfg.use_segment_embedding)
        seg = segment_embedding(static_cast<int>(k) + 1, cfg.d);
      for (size_t i = 0; i < s.size(); ++i) {
        src_tok.push_back(s[i]);
        src_pos.push_back(static_cast<int>(i));
        if (cfg.use_segment_embedding)
          seg_rows.insert(seg_rows.end(), seg.data(), seg.data() + cfg.d);
      }
      off += static_cast<int>(s.size());
    }
    ex_span[e].len = off - ex_span[e].off;
  }

  Tensor x = ops::add(
      tape, ops::embedding_lookup(tape, bound("embed.tok"), src_tok),
      ops::embedding_lookup(tape, bound("embed.pos"), src_pos));
  if (cfg.use_segment_embedding) {
    Tensor seg({static_cast<int>(src_tok.size()), cfg.d}, std::move(seg_rows));
    x = ops::add(tape, x, seg);
  }

  // Coarse encoder over per-example spans (or per-source when the
  // concatenated-encoding ablation is off).
  std::vector<AttnSpan> enc_spans;
  for (size_t e = 0; e < B; ++e) {
    auto spans = coarse_spans(cfg, ex_span[e].off, src_lengths[e]);
    enc_spans.insert(enc_spans.end(), spans.begin(), spans.end());
  }
  Tensor r = x;
  for (int i = 0; i < cfg.n_coarse; ++i)
    r = encoder_layer_packed(tape, bound, cfg, "coarse." + std::to_string(i),
                             r, enc_spans, opts, derive_seed(1, i));

  // Fine encoder: per-(example, source) self-attention plus cross-source
  // attention within each example.
  Tensor a = r;
  for (int f = 0; f < cfg.effective_n_fine(); ++f) {
    const std::string p = "fine." + std::to_string(f);
    std::vector<AttnSpan> self_sp;
    for (size_t e = 0; e < B; ++e)
      for (const RowSpan& rs : src_span[e]) self_sp.push_back({rs, {rs}, false});
    const auto self_p = attention_params(bound, p + ".self_attn", cfg.heads);
    Tensor att = packed_attention(tape, a, a, self_sp, self_p);
    Tensor b = sublayer_out(tape, bound, p + ".ln1", a, att, opts,
                            derive_seed(2, f));
    Tensor c = b;
    if (cfg.fine_encoder_cross_attention && cfg.num_sources > 1) {
      std::vector<AttnSpan> cross_sp;
      for (size_t e = 0; e < B; ++e)
        for (size_t k = 0; k < src_span[e].size(); ++k) {
          AttnSpan s;
          s.q = src_span[e][k];
          for (size_t j = 0; j < src_span[e].size(); ++j)
            if (j != k) s.kv.push_back(src_span[e][j]);
          cross_sp.push_back(std::move(s));
        }
      const auto cross_p = attention_params(bound, p + ".cross_attn",
                                            cfg.heads);
      Tensor catt = packed_attention(tape, b, b, cross_sp, cross_p);
      c = sublayer_out(tape, bound, p + ".ln2", b, catt, opts,
                       derive_seed(3, f));
    }
    Tensor ff = ffn_block(tape, bound, p + ".ffn", c);
    a = sublayer_out(tape, bound, p + ".ln3", c, ff, opts, derive_seed(4, f));
  }

  // Packed decoder rows.
  std::vector<int> tgt_in, tgt_out, tgt_pos;
  std::vector<RowSpan> tgt_span(B);
  std::vector<real> weights;
  int toff = 0;
  for (size_t e = 0; e < B; ++e) {
    const auto& t = examples[e].target;
    const int len = static_cast<int>(t.size()) - 1;
    tgt_span[e] = {toff, len};
    for (int i = 0; i < len; ++i) {
      tgt_in.push_back(t[static_cast<size_t>(i)]);
      tgt_out.push_back(t[static_cast<size_t>(i) + 1]);
      tgt_pos.push_back(i);
      weights.push_back(real(1) /
                        (static_cast<real>(B) * static_cast<real>(len)));
    }
    toff += len;
  }

  Tensor g = ops::add(
      tape, ops::embedding_lookup(tape, bound("embed.tok"), tgt_in),
      ops::embedding_lookup(tape, bound("embed.pos"), tgt_pos));

  for (int i = 0; i < cfg.n_decoder; ++i) {
    const std::string p = "decoder." + std::to_string(i);
    std::vector<AttnSpan> causal_sp;
    for (size_t e = 0; e < B; ++e)
      causal_sp.push_back({tgt_span[e], {tgt_span[e]}, true});
    const auto self_p = attention_params(bound, p + ".self_attn", cfg.heads);
    Tensor sa = packed_attention(tape, g, g, causal_sp, self_p);
    Tensor g1 = sublayer_out(tape, bound, p + ".ln1", g, sa, opts,
                             derive_seed(5, i));

    const auto cross_p = attention_params(bound, p + ".cross_attn", cfg.heads);
    Tensor h;
    if (cfg.separated_decoder_cross_attention) {
      // Query spans repeat per source; outputs are mean-pooled per example.
      std::vector<AttnSpan> sep_sp;
      for (size_t e = 0; e < B; ++e)
        for (const RowSpan& rs : src_span[e])
          sep_sp.push_back({tgt_span[e], {rs}, false});
      Tensor pooled_src = packed_attention(tape, g1, a, sep_sp, cross_p);
      const int K = cfg.num_sources;
      std::vector<Tensor> per_example;
      int prow = 0;
      for (size_t e = 0; e < B; ++e) {
        std::vector<Tensor> per_source;
        for (int k = 0; k < K; ++k) {
          per_source.push_back(ops::slice_rows(tape, pooled_src, prow,
                                               prow + tgt_span[e].len));
          prow += tgt_span[e].len;
        }
        per_example.push_back(
            K == 1 ? per_source[0]
                   : ops::scale(tape, ops::add_n(tape, per_source),
                                real(1) / static_cast<real>(K)));
      }
      h = per_example.size() == 1 ? per_example[0]
                                  : ops::concat_rows(tape, per_example);
    } else {
      std::vector<AttnSpan> joint_sp;
      for (size_t e = 0; e < B; ++e)
        joint_sp.push_back({tgt_span[e], src_span[e], false});
      h = packed_attention(tape, g1, a, joint_sp, cross_p);
    }
    Tensor g2 = sublayer_out(tape, bound, p + ".ln2", g1, h, opts,
                             derive_seed(6, i));
    Tensor ff = ffn_block(tape, bound, p + ".ffn", g2);
    g = sublayer_out(tape, bound, p + ".ln3", g2, ff, opts, derive_seed(7, i));
  }

  // Output projection tied to the token embedding.
  Tensor logits = ops::matmul_nt(tape, g, bound("embed.tok"));

  std::vector<real> row_logprob;
  ForwardResult res;
  res.loss = ops::cross_entropy_weighted(tape, logits, tgt_out,
                                         Vocabulary::kPad, weights,
                                         &row_logprob);

  // Per-example log-probs and teacher-forced accuracy from the logits.
  res.token_logprob.resize(B);
  long correct = 0, total = 0;
  const real* lp = logits.data();
  const int v = logits.cols();
  for (size_t e = 0; e < B; ++e) {
    const RowSpan& s = tgt_span[e];
    for (int i = 0; i < s.len; ++i) {
      const int row = s.off + i;
      res.token_logprob[e].push_back(row_logprob[static_cast<size_t>(row)]);
      const long o = static_cast<long>(row) * v;
      int best = 0;
      for (int j = 1; j < v; ++j)
        if (lp[o + j] > lp[o + best]) best = j;
      correct += best == tgt_out[static_cast<size_t>(row)];
      ++total;
    }
  }
  res.token_accuracy =
      total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return res;
}

// ---- inference entries -----------------------------------------------------

EncodedSources encode_sources(const Parameters& params, const ModelConfig& cfg,
                              const std::vector<std::vector<int>>& sources) {
  if (static_cast<int>(sources.size()) != cfg.num_sources)
    throw ContractError("encode_sources: arity mismatch");
  Tape tape(false);
  BoundParams bound = bind_parameters(tape, params);
  Tensor x = input_representation(tape, bound, cfg, sources);
  std::vector<int> lengths;
  for (const auto& s : sources) lengths.push_back(static_cast<int>(s.size()));
  Tensor r = coarse_encode(tape, bound, cfg, x, lengths);
  std::vector<Tensor> parts = split_sources(tape, r, lengths);
  parts = fine_encode(tape, bound, cfg, parts);
  EncodedSources enc;
  enc.reps = std::move(parts);
  return enc;
}

std::vector<real> next_token_logprobs(const Parameters& params,
                                      const ModelConfig& cfg,
                                      const EncodedSources& enc,
                                      const std::vector<int>& prefix) {
  if (static_cast<int>(prefix.size()) + 1 > cfg.max_len)
    throw ContractError("decode: prefix exceeds max_len");
  Tape tape(false);
  BoundParams bound = bind_parameters(tape, params);
  std::vector<int> in_ids{Vocabulary::kBos};
  in_ids.insert(in_ids.end(), prefix.begin(), prefix.end());
  std::vector<int> pos(in_ids.size());
  for (size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
  Tensor g = ops::add(
      tape, ops::embedding_lookup(tape, bound("embed.tok"), in_ids),
      ops::embedding_lookup(tape, bound("embed.pos"), pos));
  for (int i = 0; i < cfg.n_decoder; ++i)
    g = decoder_layer(tape, bound, cfg, i, g, enc.reps);
  Tensor last = ops::slice_rows(tape, g, g.rows() - 1, g.rows());
  Tensor logits = ops::matmul_nt(tape, last, bound("embed.tok"));
  // log-softmax over the single row
  const real* p = logits.data();
  const int v = logits.cols();
  real mx = p[0];
  for (int j = 1; j < v; ++j) mx = std::max(mx, p[j]);
  double sum = 0.0;
  for (int j = 0; j < v; ++j) sum += std::exp(static_cast<double>(p[j] - mx));
  const real lse = mx + static_cast<real>(std::log(sum));
  std::vector<real> out(static_cast<size_t>(v));
  for (int j = 0; j < v; ++j) out[static_cast<size_t>(j)] = p[j] - lse;
  return out;
}

real score_sequence(const Parameters& params, const ModelConfig& cfg,
                    const std::vector<std::vector<int>>& sources,
                    const std::vector<int>& target) {
  if (target.size() < 2 || target.front() != Vocabulary::kBos ||
      target.back() != Vocabulary::kEos)
    throw ContractError("score_sequence: target must be bos ... eos");
  Tape tape(false);
  BoundParams bound = bind_parameters(tape, params);
  Batch batch;
  MultiSourceExample e;
  e.sources = sources;
  e.target = target;
  batch = make_batch({e}, Vocabulary::kPad, 1L << 30);
  ForwardResult fr = forward_logprob(tape, bound, cfg, batch);
  real s = real(0);
  for (real lp : fr.token_logprob[0]) s += lp;
  return s;
}

}  // namespace trice
