#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "trice/bleu.hpp"

using namespace trice;

TEST_CASE("identical corpus scores 100") {
  const std::vector<std::string> lines{"a b c", "the quick brown fox", "x"};
  EvalReport r = corpus_bleu(lines, lines);
  CHECK(r.bleu == doctest::Approx(100.0));
  CHECK(r.brevity_penalty == doctest::Approx(1.0));
}

TEST_CASE("zero n-gram overlap scores 0 without smoothing") {
  EvalReport r = corpus_bleu({"a a a a a"}, {"b b b b b"});
  CHECK(r.bleu == 0.0);
  EvalReport s = corpus_bleu({"a a a a a"}, {"b b b b b"}, true);
  CHECK(s.bleu == 0.0);  // unigram still has zero matches
}

TEST_CASE("hand-computed: hypothesis shorter than four tokens") {
  // hyp "the cat sat" vs ref "the cat sat down": p1=p2=p3=1, no 4-grams
  // exist, BP = exp(1 - 4/3).
  EvalReport r = corpus_bleu({"the cat sat"}, {"the cat sat down"});
  CHECK(r.precisions[0] == doctest::Approx(1.0));
  CHECK(r.precisions[1] == doctest::Approx(1.0));
  CHECK(r.precisions[2] == doctest::Approx(1.0));
  CHECK(r.precisions[3] == 0.0);  // order absent from the corpus
  CHECK(r.brevity_penalty == doctest::Approx(std::exp(-1.0 / 3.0)));
  CHECK(r.bleu == doctest::Approx(100.0 * std::exp(-1.0 / 3.0)).epsilon(1e-9));
}

TEST_CASE("hand-computed: brevity penalty with full precisions") {
  // hyp "a b c d" vs ref "a b c d e f": all precisions 1, BP = exp(-0.5)
  EvalReport r = corpus_bleu({"a b c d"}, {"a b c d e f"});
  for (int n = 0; n < 4; ++n)
    CHECK(r.precisions[static_cast<size_t>(n)] == doctest::Approx(1.0));
  CHECK(r.bleu == doctest::Approx(100.0 * std::exp(-0.5)).epsilon(1e-9));
}

TEST_CASE("hand-computed: corpus aggregation over two lines") {
  // line1 hyp "a b" ref "a b"; line2 hyp "c d" ref "c x"
  // p1 = 3/4, p2 = 1/2, orders 3 and 4 absent; BP = 1.
  EvalReport r = corpus_bleu({"a b", "c d"}, {"a b", "c x"});
  CHECK(r.precisions[0] == doctest::Approx(0.75));
  CHECK(r.precisions[1] == doctest::Approx(0.5));
  CHECK(r.brevity_penalty == doctest::Approx(1.0));
  CHECK(r.bleu == doctest::Approx(100.0 * std::sqrt(0.375)).epsilon(1e-9));
}

TEST_CASE("clipping caps repeated n-grams at the reference count") {
  EvalReport r = corpus_bleu({"the the the the"}, {"the cat"});
  CHECK(r.precisions[0] == doctest::Approx(0.25));  // one "the" allowed
}

TEST_CASE("BLEU is invariant to corpus line order") {
  const std::vector<std::string> hyps{"a b c", "d e", "f g h i"};
  const std::vector<std::string> refs{"a b x", "d e", "f g h j"};
  EvalReport r1 = corpus_bleu(hyps, refs);
  std::vector<size_t> perm{2, 0, 1};
  std::vector<std::string> h2, r2;
  for (size_t i : perm) {
    h2.push_back(hyps[i]);
    r2.push_back(refs[i]);
  }
  EvalReport r2rep = corpus_bleu(h2, r2);
  CHECK(r1.bleu == doctest::Approx(r2rep.bleu).epsilon(1e-12));
}

TEST_CASE("add-one smoothing unblocks missing higher orders") {
  // Unigrams overlap but no bigram does; smoothing keeps the score > 0.
  EvalReport hard = corpus_bleu({"a c b d"}, {"a b c d"});
  CHECK(hard.bleu == 0.0);
  EvalReport soft = corpus_bleu({"a c b d"}, {"a b c d"}, true);
  CHECK(soft.bleu > 0.0);
  CHECK(soft.precisions[0] == doctest::Approx(1.0));
}

TEST_CASE("errors: empty reference and unaligned lists") {
  CHECK_THROWS_AS((void)corpus_bleu({"a"}, {""}), ContractError);
  CHECK_THROWS_AS((void)corpus_bleu({"a", "b"}, {"a"}), ContractError);
  CHECK_THROWS_AS((void)corpus_bleu({}, {}), ContractError);
}

TEST_CASE("paired bootstrap: ties split, dominance, determinism") {
  std::vector<std::string> refs, same, worse;
  for (int i = 0; i < 40; ++i) {
    refs.push_back("t" + std::to_string(i) + " u v w");
    same.push_back(refs.back());
    worse.push_back("z z z z");
  }
  const double p_tie = paired_bootstrap(same, same, refs, 1000, 5);
  CHECK(p_tie == doctest::Approx(0.5).epsilon(0.1));

  // `a` strictly better everywhere -> b essentially never wins.
  const double p_dom = paired_bootstrap(same, worse, refs, 1000, 5);
  CHECK(p_dom < 0.01);

  CHECK(paired_bootstrap(same, worse, refs, 500, 11) ==
        paired_bootstrap(same, worse, refs, 500, 11));
  CHECK_THROWS_AS((void)paired_bootstrap(same, worse, refs, 50, 1),
                  ContractError);
}
