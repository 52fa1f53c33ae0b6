#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "trice/kernels.hpp"

using trice::real;
namespace k = trice::kernels;

namespace {

std::vector<real> randn(long n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  std::vector<real> v(static_cast<size_t>(n));
  for (auto& x : v) x = static_cast<real>(d(rng));
  return v;
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bitwise") {
  std::mt19937_64 sizes(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + static_cast<int>(sizes() % 300);
    const int kk = 1 + static_cast<int>(sizes() % 80);
    const int n = 1 + static_cast<int>(sizes() % 300);
    auto a = randn(static_cast<long>(m) * kk, 100 + trial);
    auto b = randn(static_cast<long>(kk) * n, 200 + trial);
    auto bt = randn(static_cast<long>(n) * kk, 300 + trial);

    std::vector<real> c1(static_cast<size_t>(m) * n), c2(c1);
    k::serial::matmul(m, kk, n, a.data(), b.data(), c1.data());
    k::matmul(m, kk, n, a.data(), b.data(), c2.data());
    CHECK(c1 == c2);

    k::serial::matmul_nt(m, kk, n, a.data(), bt.data(), c1.data());
    k::matmul_nt(m, kk, n, a.data(), bt.data(), c2.data());
    CHECK(c1 == c2);

    std::vector<real> d1(static_cast<size_t>(kk) * n), d2(d1);
    auto g = randn(static_cast<long>(m) * n, 400 + trial);
    k::serial::matmul_tn(m, kk, n, a.data(), g.data(), d1.data());
    k::matmul_tn(m, kk, n, a.data(), g.data(), d2.data());
    CHECK(d1 == d2);

    std::vector<real> s1(static_cast<size_t>(m) * n), s2(s1);
    k::serial::softmax_rows(m, n, g.data(), nullptr, s1.data());
    k::softmax_rows(m, n, g.data(), nullptr, s2.data());
    CHECK(s1 == s2);

    auto gain = randn(n, 500 + trial);
    auto bias = randn(n, 600 + trial);
    std::vector<real> y1(static_cast<size_t>(m) * n), y2(y1);
    std::vector<real> mu1(static_cast<size_t>(m)), mu2(mu1), r1(mu1), r2(mu1);
    k::serial::layer_norm_rows(m, n, g.data(), gain.data(), bias.data(),
                               real(1e-5), y1.data(), mu1.data(), r1.data());
    k::layer_norm_rows(m, n, g.data(), gain.data(), bias.data(), real(1e-5),
                       y2.data(), mu2.data(), r2.data());
    CHECK(y1 == y2);

    std::vector<real> e1(a.size()), e2(a.size());
    k::serial::gelu(static_cast<long>(a.size()), a.data(), e1.data());
    k::gelu(static_cast<long>(a.size()), a.data(), e2.data());
    CHECK(e1 == e2);
  }
}

TEST_CASE("matmul identity") {
  std::vector<real> eye{1, 0, 0, 0, 1, 0, 0, 0, 1};
  auto m = randn(9, 42);
  std::vector<real> out(9);
  k::matmul(3, 3, 3, eye.data(), m.data(), out.data());
  CHECK(out == m);
}

TEST_CASE("matmul hand example") {
  // [[1,2],[3,4]] x [[0],[1]] = [[2],[4]]
  std::vector<real> a{1, 2, 3, 4}, b{0, 1}, c(2);
  k::matmul(2, 2, 1, a.data(), b.data(), c.data());
  CHECK(c[0] == real(2));
  CHECK(c[1] == real(4));
}

TEST_CASE("softmax rows: uniform, shift invariance, closed form") {
  std::vector<real> x{0, 0, 0, 0};
  std::vector<real> y(4);
  k::softmax_rows(1, 4, x.data(), nullptr, y.data());
  for (real v : y) CHECK(v == doctest::Approx(0.25));

  auto a = randn(24, 11);
  std::vector<real> shifted(a);
  for (auto& v : shifted) v += real(3.25);
  std::vector<real> ya(24), yb(24);
  k::softmax_rows(4, 6, a.data(), nullptr, ya.data());
  k::softmax_rows(4, 6, shifted.data(), nullptr, yb.data());
  for (int i = 0; i < 24; ++i)
    CHECK(ya[static_cast<size_t>(i)] ==
          doctest::Approx(yb[static_cast<size_t>(i)]).epsilon(1e-5));

  std::vector<real> two{real(0), real(std::log(3.0))};
  std::vector<real> yt(2);
  k::softmax_rows(1, 2, two.data(), nullptr, yt.data());
  CHECK(yt[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(yt[1] == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("softmax rows sum to one and stay in [0,1]") {
  auto a = randn(50 * 17, 12, 4.0);
  std::vector<real> y(a.size());
  k::softmax_rows(50, 17, a.data(), nullptr, y.data());
  for (int i = 0; i < 50; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 17; ++j) {
      const real v = y[static_cast<size_t>(i) * 17 + static_cast<size_t>(j)];
      CHECK(v >= real(0));
      CHECK(v <= real(1));
      sum += static_cast<double>(v);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("masked softmax: dead rows come out zero and are counted") {
  auto a = randn(3 * 4, 13);
  std::vector<unsigned char> keep(12, 1);
  for (size_t j = 4; j < 8; ++j) keep[j] = 0;  // row 1 has nothing to keep
  std::vector<real> y(12);
  const int dead = k::softmax_rows(3, 4, a.data(), keep.data(), y.data());
  CHECK(dead == 1);
  for (size_t j = 4; j < 8; ++j) CHECK(y[j] == real(0));
  double s0 = 0, s2 = 0;
  for (size_t j = 0; j < 4; ++j) {
    s0 += y[j];
    s2 += y[8 + j];
  }
  CHECK(s0 == doctest::Approx(1.0));
  CHECK(s2 == doctest::Approx(1.0));
}

TEST_CASE("layer norm constant row collapses to bias") {
  std::vector<real> x{5, 5, 5, 5};
  std::vector<real> gain{1, 1, 1, 1}, bias{0, 0, 0, 0};
  std::vector<real> y(4), mu(1), rs(1);
  k::layer_norm_rows(1, 4, x.data(), gain.data(), bias.data(), real(1e-5),
                     y.data(), mu.data(), rs.data());
  for (real v : y) CHECK(std::abs(v) < real(1e-4));
}

TEST_CASE("layer norm leaves an already-normalized row in place") {
  std::vector<real> x{1, -1};
  std::vector<real> gain{1, 1}, bias{0, 0};
  std::vector<real> y(2), mu(1), rs(1);
  k::layer_norm_rows(1, 2, x.data(), gain.data(), bias.data(), real(1e-8),
                     y.data(), mu.data(), rs.data());
  CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(y[1] == doctest::Approx(-1.0).epsilon(1e-3));
}

TEST_CASE("gelu endpoints") {
  std::vector<real> x{0, 10};
  std::vector<real> y(2);
  k::gelu(2, x.data(), y.data());
  CHECK(y[0] == real(0));
  CHECK(std::abs(y[1] - real(10)) < real(1e-6));
}
