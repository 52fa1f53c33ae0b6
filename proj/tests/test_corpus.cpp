#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "trice/corpus.hpp"
#include "trice/trainer.hpp"

using namespace trice;

namespace {

std::string tmp_file(const std::string& name, const std::string& content) {
  const auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream f(path);
  f << content;
  return path;
}

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> f;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i)
    if (i == line.size() || line[i] == '\t') {
      f.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  return f;
}

}  // namespace

TEST_CASE("build_vocab: reserved block then frequency order") {
  const auto path = tmp_file("vocab_in.txt", "a a b\n");
  Vocabulary v = build_vocab({path}, 2);
  CHECK(v.size() == 9);
  CHECK(v.token(0) == "<pad>");
  CHECK(v.token(1) == "<s>");
  CHECK(v.token(2) == "</s>");
  CHECK(v.token(3) == "<unk>");
  CHECK(v.token(4) == "<mask>");
  CHECK(v.token(5) == "<L1>");
  CHECK(v.token(6) == "<L2>");
  CHECK(v.token(7) == "a");
  CHECK(v.token(8) == "b");
  CHECK(v.id("a") == 7);
  CHECK(v.id("never-seen") == Vocabulary::kUnk);

  Vocabulary v2 = build_vocab({path}, 2);
  for (int i = 0; i < v.size(); ++i) CHECK(v.token(i) == v2.token(i));

  const auto empty = tmp_file("vocab_empty.txt", "\n");
  CHECK_THROWS_AS((void)build_vocab({empty}, 2), ContractError);
}

TEST_CASE("vocabulary round trips through encode/decode and files") {
  const auto path = tmp_file("vocab_rt.txt", "x y z z y x q\n");
  Vocabulary v = build_vocab({path}, 3);
  const std::string text = "x q z <L2>";
  CHECK(v.decode(v.encode(text)) == text);

  const auto vpath =
      (std::filesystem::temp_directory_path() / "vocab_rt.vocab").string();
  v.save(vpath);
  Vocabulary loaded = Vocabulary::load(vpath);
  CHECK(loaded.size() == v.size());
  CHECK(loaded.num_sources() == 3);
  for (int i = 0; i < v.size(); ++i) CHECK(loaded.token(i) == v.token(i));
}

TEST_CASE("complementary halves: interleaving is exact and seeded") {
  GenSpec spec;
  spec.dm_train = 200;
  spec.dm_dev = 10;
  spec.dm_test = 10;
  spec.dp_train = 50;
  spec.dp_dev = 10;
  spec.seed = 7;
  CorpusSet c = gen_synthetic_corpus(spec);
  CorpusSet c2 = gen_synthetic_corpus(spec);
  CHECK(c.dm_train == c2.dm_train);
  CHECK(c.dp_train == c2.dp_train);

  for (const auto& line : c.dm_train) {
    const auto fields = fields_of(line);
    REQUIRE(fields.size() == 3);
    const auto s1 = split_tokens(fields[0]);
    const auto s2 = split_tokens(fields[1]);
    const auto tgt = split_tokens(fields[2]);
    REQUIRE(s1.size() >= 2);
    CHECK(s1[0] == "<L1>");
    CHECK(s2[0] == "<L2>");
    CHECK(s1.size() == s2.size());
    CHECK(tgt.size() == 2 * (s1.size() - 1));
    for (size_t i = 1; i < s1.size(); ++i) {
      // f1: a<j> -> c<j>; f2: b<j> -> c<alphabet + j>
      const int a = std::stoi(s1[i].substr(1));
      const int b = std::stoi(s2[i].substr(1));
      CHECK(tgt[2 * (i - 1)] == "c" + std::to_string(a));
      CHECK(tgt[2 * (i - 1) + 1] == "c" + std::to_string(spec.alphabet + b));
    }
  }
}

TEST_CASE("complementary halves: even target positions ignore source 2") {
  // Empirical independence: the first target token's distribution
  // conditioned on the first source-2 token matches the marginal.
  GenSpec spec;
  spec.dm_train = 6000;
  spec.dm_dev = 1;
  spec.dm_test = 1;
  spec.dp_train = 1;
  spec.dp_dev = 1;
  spec.alphabet = 4;
  spec.seed = 3;
  CorpusSet c = gen_synthetic_corpus(spec);
  std::map<std::string, std::map<std::string, int>> joint;
  std::map<std::string, int> marg;
  for (const auto& line : c.dm_train) {
    const auto fields = fields_of(line);
    const auto s2 = split_tokens(fields[1]);
    const auto tgt = split_tokens(fields[2]);
    joint[s2[1]][tgt[0]]++;
    marg[tgt[0]]++;
  }
  for (const auto& [b_tok, dist] : joint) {
    int total = 0;
    for (const auto& [t, n] : dist) total += n;
    for (const auto& [t_tok, n] : dist) {
      const double cond = static_cast<double>(n) / total;
      const double overall = static_cast<double>(marg[t_tok]) / spec.dm_train;
      CHECK(std::abs(cond - overall) < 0.06);
    }
  }
}

TEST_CASE("noisy duplicate and tagged copy shapes") {
  GenSpec spec;
  spec.task = SyntheticTask::kNoisyDuplicate;
  spec.dm_train = 50;
  spec.dm_dev = 5;
  spec.dm_test = 5;
  spec.dp_train = 5;
  spec.dp_dev = 5;
  CorpusSet nd = gen_synthetic_corpus(spec);
  CHECK(nd.num_sources == 2);
  spec.task = SyntheticTask::kTaggedCopy;
  CorpusSet tc = gen_synthetic_corpus(spec);
  CHECK(tc.num_sources == 1);
  for (const auto& line : tc.dm_train) {
    const auto tab = line.find('\t');
    const auto src = split_tokens(line.substr(0, tab));
    const auto tgt = split_tokens(line.substr(tab + 1));
    CHECK(src.size() == tgt.size() + 1);
    for (size_t i = 0; i < tgt.size(); ++i) CHECK(src[i + 1] == tgt[i]);
  }
  CHECK_THROWS_AS((void)parse_task("no-such-task"), ContractError);
}

TEST_CASE("corruption: identity at zero, budget near ratio, never longer") {
  std::vector<int> sent;
  sent.push_back(5);  // language tag, protected
  for (int i = 0; i < 100; ++i) sent.push_back(10 + (i % 30));

  CHECK(corrupt_for_denoising(sent, 0.0, Vocabulary::kMask, 7, 1) == sent);

  double removed_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto out =
        corrupt_for_denoising(sent, 0.3, Vocabulary::kMask, 7, seed);
    CHECK(out.size() <= sent.size());
    CHECK(out[0] == 5);  // tag survives
    long kept = 0;
    for (int id : out) kept += id != Vocabulary::kMask && id != 5;
    removed_sum += static_cast<double>(100 - kept);
  }
  const double mean_removed = removed_sum / 100.0;
  CHECK(mean_removed > 27.0);
  CHECK(mean_removed < 33.0);

  CHECK(corrupt_for_denoising(sent, 0.3, Vocabulary::kMask, 7, 9) ==
        corrupt_for_denoising(sent, 0.3, Vocabulary::kMask, 7, 9));
}

TEST_CASE("corruption collapses spans to single masks") {
  std::vector<int> sent(20, 10);
  const auto out = corrupt_for_denoising(sent, 0.5, Vocabulary::kMask, 7, 3);
  for (size_t i = 1; i < out.size(); ++i)
    CHECK(!(out[i] == Vocabulary::kMask && out[i - 1] == Vocabulary::kMask));
}

TEST_CASE("single-source sampling is uniform and keeps the target") {
  MultiSourceExample e;
  e.sources = {{5, 10, 11}, {6, 20, 21}};
  e.target = {1, 30, 2};
  long first = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto s = sample_single_source(e, static_cast<std::uint64_t>(i));
    REQUIRE(s.sources.size() == 1);
    CHECK(s.target == e.target);
    first += s.sources[0][0] == 5;
  }
  CHECK(first > 5000 - 150);
  CHECK(first < 5000 + 150);

  MultiSourceExample single;
  single.sources = {{5, 9}};
  single.target = {1, 9, 2};
  for (int i = 0; i < 5; ++i)
    CHECK(sample_single_source(single, static_cast<std::uint64_t>(i))
              .sources[0] == single.sources[0]);
}

TEST_CASE("make_batch pads to the per-source max and sets masks") {
  MultiSourceExample a;
  a.sources = {{5, 10, 11}, {6, 20}};
  a.target = {1, 30, 2};
  MultiSourceExample b;
  b.sources = {{5, 10, 11, 12, 13}, {6, 20, 21}};
  b.target = {1, 30, 31, 32, 2};

  Batch one = make_batch({a}, Vocabulary::kPad, 100);
  CHECK(one.sources.ids[0][0].size() == 3);  // no padding
  for (bool m : one.sources.pad_mask[0][0]) CHECK(!m);

  Batch both = make_batch({a, b}, Vocabulary::kPad, 100);
  CHECK(both.sources.ids[0][0].size() == 5);
  CHECK(both.sources.ids[0][0][3] == Vocabulary::kPad);
  int pads = 0;
  for (bool m : both.sources.pad_mask[0][0]) pads += m;
  CHECK(pads == 2);
  CHECK(both.targets.ids[0].size() == 5);

  CHECK_THROWS_AS((void)make_batch({a}, Vocabulary::kPad, 4), ContractError);
}

TEST_CASE("pack_batches is deterministic and respects the budget") {
  std::vector<MultiSourceExample> exs;
  for (int i = 0; i < 40; ++i) {
    MultiSourceExample e;
    e.sources = {{5, 10, 11}, {6, 20, 21, 22}};
    e.target = {1, 30, 31, 2};
    exs.push_back(e);
  }
  const auto b1 = pack_batches(exs, 44, 5);
  const auto b2 = pack_batches(exs, 44, 5);
  CHECK(b1 == b2);
  for (const auto& idx : b1) {
    std::vector<MultiSourceExample> chunk;
    for (int i : idx) chunk.push_back(exs[static_cast<size_t>(i)]);
    CHECK_NOTHROW((void)make_batch(chunk, Vocabulary::kPad, 44));
  }
}

TEST_CASE("denoising examples strip the tag from the target side") {
  std::vector<int> sentence{5, 10, 11, 12};
  const auto e = denoising_example(sentence, 0.0, 2, 1);
  CHECK(e.sources[0] == sentence);
  CHECK(e.target ==
        std::vector<int>{Vocabulary::kBos, 10, 11, 12, Vocabulary::kEos});
}

TEST_CASE("corpus files round trip, D_s shares D_m targets") {
  GenSpec spec;
  spec.dm_train = 20;
  spec.dm_dev = 5;
  spec.dm_test = 5;
  spec.dp_train = 8;
  spec.dp_dev = 4;
  CorpusSet c = gen_synthetic_corpus(spec);
  const auto dir =
      (std::filesystem::temp_directory_path() / "trice_corpus_rt").string();
  write_corpus_set(c, dir);
  CHECK(read_lines(dir + "/dm.train.tsv") == c.dm_train);
  CHECK(read_lines(dir + "/ds.train.tsv") == c.ds_train);
  CHECK(read_lines(dir + "/dp.dev.tsv") == c.dp_dev);
  for (size_t i = 0; i < c.ds_train.size(); ++i) {
    const auto& ds = c.ds_train[i];
    const auto& dm = c.dm_train[i];
    CHECK(ds.substr(ds.rfind('\t') + 1) == dm.substr(dm.rfind('\t') + 1));
  }
}
