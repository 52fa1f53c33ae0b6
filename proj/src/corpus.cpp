#include "trice/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace trice {

SyntheticTask parse_task(const std::string& name) {
  if (name == "complementary-halves") return SyntheticTask::kComplementaryHalves;
  if (name == "noisy-duplicate") return SyntheticTask::kNoisyDuplicate;
  if (name == "tagged-copy") return SyntheticTask::kTaggedCopy;
  throw ContractError("unknown synthetic task: " + name);
}

std::string task_name(SyntheticTask task) {
  switch (task) {
    case SyntheticTask::kComplementaryHalves: return "complementary-halves";
    case SyntheticTask::kNoisyDuplicate: return "noisy-duplicate";
    case SyntheticTask::kTaggedCopy: return "tagged-copy";
  }
  return "?";
}

namespace {

std::string tok(char prefix, int i) { return prefix + std::to_string(i); }

struct TaskGen {
  const GenSpec& spec;
  std::mt19937_64 rng;

  explicit TaskGen(const GenSpec& s, std::uint64_t salt)
      : spec(s), rng(derive_seed(s.seed, salt)) {}

  int len() {
    std::uniform_int_distribution<int> d(spec.min_tokens, spec.max_tokens);
    return d(rng);
  }
  int sym() {
    std::uniform_int_distribution<int> d(0, spec.alphabet - 1);
    return d(rng);
  }

  // One example as token strings: sources (tagged) + target.
  std::pair<std::vector<std::string>, std::string> example() {
    switch (spec.task) {
      case SyntheticTask::kComplementaryHalves: {
        const int n = len();
        std::string s1 = Vocabulary::lang_tag(1), s2 = Vocabulary::lang_tag(2);
        std::string tgt;
        for (int i = 0; i < n; ++i) {
          const int a = sym(), b = sym();
          s1 += ' ' + tok('a', a);
          s2 += ' ' + tok('b', b);
          if (i) tgt += ' ';
          // f1 maps the a-alphabet to the low half of the target alphabet,
          // f2 maps the b-alphabet to the high half; interleaved a-first.
          tgt += tok('c', a) + ' ' + tok('c', spec.alphabet + b);
        }
        return {{s1, s2}, tgt};
      }
      case SyntheticTask::kNoisyDuplicate: {
        const int n = len();
        std::vector<int> base(static_cast<size_t>(n));
        for (int& v : base) v = sym();
        std::string s1 = Vocabulary::lang_tag(1), s2 = Vocabulary::lang_tag(2);
        std::string tgt;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < n; ++i) {
          const int v = base[static_cast<size_t>(i)];
          s1 += ' ' + tok('a', v);
          const int w = u(rng) < spec.duplicate_noise ? sym() : v;
          s2 += ' ' + tok('a', w);
          if (i) tgt += ' ';
          tgt += tok('c', v);
        }
        return {{s1, s2}, tgt};
      }
      case SyntheticTask::kTaggedCopy: {
        const int n = len();
        std::string s1 = Vocabulary::lang_tag(1);
        std::string tgt;
        for (int i = 0; i < n; ++i) {
          const int v = sym();
          s1 += ' ' + tok('a', v);
          if (i) tgt += ' ';
          tgt += tok('a', v);
        }
        return {{s1}, tgt};
      }
    }
    throw ContractError("unreachable task");
  }
};

std::string join_fields(const std::vector<std::string>& sources,
                        const std::string& target) {
  std::string line;
  for (const auto& s : sources) line += s + '\t';
  line += target;
  return line;
}

std::vector<std::string> gen_dm(const GenSpec& spec, std::uint64_t salt,
                                int count) {
  TaskGen g(spec, salt);
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    auto [sources, target] = g.example();
    out.push_back(join_fields(sources, target));
  }
  return out;
}

// D_p sentences come from the exact distributions of the task: each line is
// one of the three sentences of a freshly drawn example.
std::vector<std::string> gen_dp(const GenSpec& spec, std::uint64_t salt,
                                int count) {
  TaskGen g(spec, salt);
  std::mt19937_64 pick(derive_seed(spec.seed, salt ^ 0x5eedll));
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    auto [sources, target] = g.example();
    std::uniform_int_distribution<size_t> d(0, sources.size());
    const size_t which = d(pick);
    out.push_back(which < sources.size() ? sources[which] : target);
  }
  return out;
}

std::vector<std::string> derive_ds(const std::vector<std::string>& dm_lines,
                                   std::uint64_t seed) {
  std::vector<std::string> out;
  out.reserve(dm_lines.size());
  for (size_t i = 0; i < dm_lines.size(); ++i) {
    std::vector<std::string> fields;
    std::istringstream ss(dm_lines[i]);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() < 2) throw ContractError("malformed D_m line");
    const size_t k = fields.size() - 1;  // source count
    std::mt19937_64 rng(derive_seed(seed, i));
    std::uniform_int_distribution<size_t> d(0, k - 1);
    out.push_back(fields[d(rng)] + '\t' + fields.back());
  }
  return out;
}

}  // namespace

CorpusSet gen_synthetic_corpus(const GenSpec& spec) {
  if (spec.alphabet < 2) throw ContractError("gen: alphabet too small");
  if (spec.min_tokens < 1 || spec.max_tokens < spec.min_tokens)
    throw ContractError("gen: bad length bounds");
  CorpusSet c;
  c.task = spec.task;
  c.num_sources = spec.task == SyntheticTask::kTaggedCopy ? 1 : 2;
  c.dm_train = gen_dm(spec, 11, spec.dm_train);
  c.dm_dev = gen_dm(spec, 12, spec.dm_dev);
  c.dm_test = gen_dm(spec, 13, spec.dm_test);
  c.ds_train = derive_ds(c.dm_train, derive_seed(spec.seed, 21));
  c.ds_dev = derive_ds(c.dm_dev, derive_seed(spec.seed, 22));
  c.dp_train = gen_dp(spec, 31, spec.dp_train);
  c.dp_dev = gen_dp(spec, 32, spec.dp_dev);
  return c;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(f, line)) out.push_back(line);
  return out;
}

void write_lines(const std::vector<std::string>& lines,
                 const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  for (const auto& l : lines) f << l << '\n';
}

void write_corpus_set(const CorpusSet& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto p = [&dir](const char* name) { return dir + "/" + name; };
  write_lines(corpus.dp_train, p("dp.train.tsv"));
  write_lines(corpus.dp_dev, p("dp.dev.tsv"));
  write_lines(corpus.ds_train, p("ds.train.tsv"));
  write_lines(corpus.ds_dev, p("ds.dev.tsv"));
  write_lines(corpus.dm_train, p("dm.train.tsv"));
  write_lines(corpus.dm_dev, p("dm.dev.tsv"));
  write_lines(corpus.dm_test, p("dm.test.tsv"));
}

std::vector<int> corrupt_for_denoising(const std::vector<int>& sentence,
                                       double ratio, int mask_id,
                                       int protected_below,
                                       std::uint64_t seed) {
  if (ratio < 0.0 || ratio >= 1.0)
    throw ContractError("corrupt: ratio must lie in [0, 1)");
  if (ratio == 0.0) return sentence;
  const int n = static_cast<int>(sentence.size());
  std::vector<int> maskable;
  for (int i = 0; i < n; ++i)
    if (sentence[static_cast<size_t>(i)] >= protected_below)
      maskable.push_back(i);
  if (maskable.empty()) return sentence;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<bool> hit(static_cast<size_t>(n), false);
  const long target = std::lround(ratio * static_cast<double>(maskable.size()));
  long covered = 0;
  // Geometric span length with mean 3 (p = 1/3).
  std::geometric_distribution<int> span_extra(1.0 / 3.0);
  std::uniform_int_distribution<size_t> start(0, maskable.size() - 1);
  int guard = 0;
  while (covered < target && ++guard < 16 * n) {
    const int s = maskable[start(rng)];
    const int span = 1 + span_extra(rng);
    for (int i = s; i < n && i < s + span; ++i) {
      const size_t idx = static_cast<size_t>(i);
      if (sentence[idx] < protected_below) break;  // never cross reserved ids
      if (!hit[idx]) {
        hit[idx] = true;
        ++covered;
      }
      if (covered >= target) break;
    }
  }

  std::vector<int> out;
  out.reserve(sentence.size());
  bool in_run = false;
  for (int i = 0; i < n; ++i) {
    if (hit[static_cast<size_t>(i)]) {
      if (!in_run) out.push_back(mask_id);  // a run collapses to one mask
      in_run = true;
    } else {
      out.push_back(sentence[static_cast<size_t>(i)]);
      in_run = false;
    }
  }
  return out;
}

MultiSourceExample sample_single_source(const MultiSourceExample& example,
                                        std::uint64_t seed) {
  if (example.sources.empty())
    throw ContractError("sample_single_source: no sources");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> d(0, example.sources.size() - 1);
  MultiSourceExample out;
  out.sources.push_back(example.sources[d(rng)]);
  out.target = example.target;
  return out;
}

MultiSourceExample encode_example(const Vocabulary& vocab,
                                  const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream ss(line);
  std::string f;
  while (std::getline(ss, f, '\t')) fields.push_back(f);
  if (fields.size() < 2) throw ContractError("example line needs >= 2 fields");
  MultiSourceExample e;
  for (size_t i = 0; i + 1 < fields.size(); ++i) {
    auto ids = vocab.encode(fields[i]);
    if (ids.empty()) throw ContractError("empty source field");
    e.sources.push_back(std::move(ids));
  }
  auto tgt = vocab.encode(fields.back());
  if (tgt.empty()) throw ContractError("empty target field");
  e.target.push_back(Vocabulary::kBos);
  e.target.insert(e.target.end(), tgt.begin(), tgt.end());
  e.target.push_back(Vocabulary::kEos);
  return e;
}

long example_tokens(const MultiSourceExample& e) {
  long n = static_cast<long>(e.target.size());
  for (const auto& s : e.sources) n += static_cast<long>(s.size());
  return n;
}

Batch make_batch(const std::vector<MultiSourceExample>& examples, int pad_id,
                 long max_tokens) {
  if (examples.empty()) throw ContractError("make_batch: no examples");
  const size_t k = examples[0].sources.size();
  for (const auto& e : examples)
    if (e.sources.size() != k)
      throw ContractError("make_batch: inconsistent source arity");

  Batch b;
  b.sources.num_sources = static_cast<int>(k);
  b.sources.ids.resize(k);
  b.sources.pad_mask.resize(k);
  b.sources.lengths.resize(k);
  long padded_total = 0;
  for (size_t s = 0; s < k; ++s) {
    size_t maxlen = 0;
    for (const auto& e : examples) maxlen = std::max(maxlen, e.sources[s].size());
    for (const auto& e : examples) {
      std::vector<int> row = e.sources[s];
      std::vector<bool> mask(maxlen, false);
      for (size_t i = row.size(); i < maxlen; ++i) mask[i] = true;
      row.resize(maxlen, pad_id);
      b.sources.lengths[s].push_back(static_cast<int>(e.sources[s].size()));
      b.sources.ids[s].push_back(std::move(row));
      b.sources.pad_mask[s].push_back(std::move(mask));
    }
    padded_total += static_cast<long>(maxlen) * static_cast<long>(examples.size());
  }
  size_t tmax = 0;
  for (const auto& e : examples) tmax = std::max(tmax, e.target.size());
  for (const auto& e : examples) {
    std::vector<int> row = e.target;
    std::vector<bool> mask(tmax, false);
    for (size_t i = row.size(); i < tmax; ++i) mask[i] = true;
    row.resize(tmax, pad_id);
    b.targets.lengths.push_back(static_cast<int>(e.target.size()));
    b.targets.ids.push_back(std::move(row));
    b.targets.pad_mask.push_back(std::move(mask));
  }
  padded_total += static_cast<long>(tmax) * static_cast<long>(examples.size());
  if (padded_total > max_tokens) {
    if (examples.size() == 1)
      throw ContractError("make_batch: single example exceeds token budget");
    throw ContractError("make_batch: padded batch exceeds token budget");
  }
  return b;
}

std::vector<std::vector<int>> pack_batches(
    const std::vector<MultiSourceExample>& examples, long max_tokens,
    std::uint64_t seed) {
  std::vector<int> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<int>> batches;
  std::vector<int> cur;
  std::vector<long> src_max;  // running per-source max length
  long tgt_max = 0;
  auto padded = [&](const MultiSourceExample& e) {
    std::vector<long> sm = src_max;
    sm.resize(std::max(sm.size(), e.sources.size()), 0);
    for (size_t s = 0; s < e.sources.size(); ++s)
      sm[s] = std::max(sm[s], static_cast<long>(e.sources[s].size()));
    const long tm = std::max(tgt_max, static_cast<long>(e.target.size()));
    long total = tm;
    for (long v : sm) total += v;
    return total * static_cast<long>(cur.size() + 1);
  };
  for (int idx : order) {
    const auto& e = examples[static_cast<size_t>(idx)];
    if (example_tokens(e) > max_tokens)
      throw ContractError("pack_batches: single example exceeds token budget");
    if (!cur.empty() && padded(e) > max_tokens) {
      batches.push_back(cur);
      cur.clear();
      src_max.assign(src_max.size(), 0);
      tgt_max = 0;
    }
    cur.push_back(idx);
    src_max.resize(std::max(src_max.size(), e.sources.size()), 0);
    for (size_t s = 0; s < e.sources.size(); ++s)
      src_max[s] = std::max(src_max[s], static_cast<long>(e.sources[s].size()));
    tgt_max = std::max(tgt_max, static_cast<long>(e.target.size()));
  }
  if (!cur.empty()) batches.push_back(cur);
  return batches;
}

}  // namespace trice
