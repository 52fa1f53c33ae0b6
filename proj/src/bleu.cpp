#include "trice/bleu.hpp"

#include <cmath>
#include <random>
#include <unordered_map>

#include "trice/vocab.hpp"

namespace trice {

namespace {

constexpr int kMaxOrder = 4;

struct BleuCounts {
  std::array<long, kMaxOrder> matched{};
  std::array<long, kMaxOrder> total{};
  long hyp_len = 0;
  long ref_len = 0;

  void operator+=(const BleuCounts& o) {
    for (int n = 0; n < kMaxOrder; ++n) {
      matched[static_cast<size_t>(n)] += o.matched[static_cast<size_t>(n)];
      total[static_cast<size_t>(n)] += o.total[static_cast<size_t>(n)];
    }
    hyp_len += o.hyp_len;
    ref_len += o.ref_len;
  }
};

// N-grams keyed by joining tokens with an unprintable separator.
void count_ngrams(const std::vector<std::string>& toks, int n,
                  std::unordered_map<std::string, long>& out) {
  if (static_cast<int>(toks.size()) < n) return;
  for (size_t i = 0; i + static_cast<size_t>(n) <= toks.size(); ++i) {
    std::string key;
    for (int j = 0; j < n; ++j) {
      if (j) key += '\x1f';
      key += toks[i + static_cast<size_t>(j)];
    }
    ++out[key];
  }
}

BleuCounts sentence_counts(const std::string& hyp, const std::string& ref) {
  const auto h = split_tokens(hyp);
  const auto r = split_tokens(ref);
  if (r.empty()) throw ContractError("corpus_bleu: empty reference line");
  BleuCounts c;
  c.hyp_len = static_cast<long>(h.size());
  c.ref_len = static_cast<long>(r.size());
  for (int n = 1; n <= kMaxOrder; ++n) {
    std::unordered_map<std::string, long> hyp_counts, ref_counts;
    count_ngrams(h, n, hyp_counts);
    count_ngrams(r, n, ref_counts);
    long total = 0, matched = 0;
    for (const auto& [key, cnt] : hyp_counts) {
      total += cnt;
      auto it = ref_counts.find(key);
      if (it != ref_counts.end()) matched += std::min(cnt, it->second);
    }
    c.total[static_cast<size_t>(n - 1)] = total;
    c.matched[static_cast<size_t>(n - 1)] = matched;
  }
  return c;
}

EvalReport report_from_counts(const BleuCounts& c, bool smooth_add_one) {
  EvalReport rep;
  double log_sum = 0.0;
  int orders = 0;
  bool zero = false;
  for (int n = 0; n < kMaxOrder; ++n) {
    const long total = c.total[static_cast<size_t>(n)];
    const long matched = c.matched[static_cast<size_t>(n)];
    if (total == 0) continue;  // order cannot occur; leave it out
    double p = static_cast<double>(matched) / static_cast<double>(total);
    if (matched == 0 && smooth_add_one && n > 0)
      p = 1.0 / static_cast<double>(total + 1);
    rep.precisions[static_cast<size_t>(n)] = p;
    if (p == 0.0) zero = true;
    else log_sum += std::log(p);
    ++orders;
  }
  rep.brevity_penalty =
      c.hyp_len >= c.ref_len || c.hyp_len == 0
          ? (c.hyp_len == 0 ? 0.0 : 1.0)
          : std::exp(1.0 - static_cast<double>(c.ref_len) /
                               static_cast<double>(c.hyp_len));
  if (zero || orders == 0 || c.hyp_len == 0) {
    rep.bleu = 0.0;
    return rep;
  }
  rep.bleu = 100.0 * rep.brevity_penalty *
             std::exp(log_sum / static_cast<double>(orders));
  return rep;
}

}  // namespace

EvalReport corpus_bleu(const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references,
                       bool smooth_add_one) {
  if (hypotheses.size() != references.size())
    throw ContractError("corpus_bleu: list length mismatch");
  if (hypotheses.empty()) throw ContractError("corpus_bleu: empty corpus");
  BleuCounts total;
  for (size_t i = 0; i < hypotheses.size(); ++i)
    total += sentence_counts(hypotheses[i], references[i]);
  return report_from_counts(total, smooth_add_one);
}

double paired_bootstrap(const std::vector<std::string>& hyps_a,
                        const std::vector<std::string>& hyps_b,
                        const std::vector<std::string>& refs, int samples,
                        std::uint64_t seed) {
  if (hyps_a.size() != refs.size() || hyps_b.size() != refs.size())
    throw ContractError("paired_bootstrap: unaligned inputs");
  if (samples < 100) throw ContractError("paired_bootstrap: samples >= 100");
  const size_t n = refs.size();
  if (n == 0) throw ContractError("paired_bootstrap: empty corpus");

  // Precompute per-sentence counts; resampling then only sums them.
  std::vector<BleuCounts> ca(n), cb(n);
  for (size_t i = 0; i < n; ++i) {
    ca[i] = sentence_counts(hyps_a[i], refs[i]);
    cb[i] = sentence_counts(hyps_b[i], refs[i]);
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, n - 1);
  double wins_b = 0.0;
  for (int s = 0; s < samples; ++s) {
    BleuCounts ta, tb;
    for (size_t i = 0; i < n; ++i) {
      const size_t j = pick(rng);
      ta += ca[j];
      tb += cb[j];
    }
    const double bleu_a = report_from_counts(ta, false).bleu;
    const double bleu_b = report_from_counts(tb, false).bleu;
    if (bleu_a < bleu_b) wins_b += 1.0;
    else if (bleu_a == bleu_b) wins_b += 0.5;
  }
  return wins_b / static_cast<double>(samples);
}

}  // namespace trice
