// Test-side central finite-difference oracle. Lives entirely in test code
// and only drives forward evaluations, so it stays independent of the
// backward implementation it checks.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "trice/tensor.hpp"

namespace fd {

using trice::real;
using trice::Tensor;

inline std::vector<real> randn_vec(long n, std::uint64_t seed,
                                   double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  std::vector<real> v(static_cast<size_t>(n));
  for (auto& x : v) x = static_cast<real>(d(rng));
  return v;
}

inline Tensor randn(std::vector<int> shape, std::uint64_t seed,
                    double scale = 1.0) {
  Tensor t(shape);
  auto v = randn_vec(t.numel(), seed, scale);
  real* p = t.mut();
  for (long i = 0; i < t.numel(); ++i) p[i] = v[static_cast<size_t>(i)];
  return t;
}

/// d loss / d x[i] for every i, by central differences.
inline std::vector<double> grad(
    const Tensor& x, const std::function<double(const Tensor&)>& loss,
    double eps) {
  std::vector<double> g(static_cast<size_t>(x.numel()));
  Tensor probe = x;
  real* p = probe.mut();
  for (long i = 0; i < x.numel(); ++i) {
    const real orig = p[i];
    p[i] = orig + static_cast<real>(eps);
    const double up = loss(probe);
    p[i] = orig - static_cast<real>(eps);
    const double down = loss(probe);
    p[i] = orig;
    g[static_cast<size_t>(i)] = (up - down) / (2.0 * eps);
  }
  return g;
}

/// max over i of |a_i - f_i| / max(|a_i|, |f_i|, floor)
inline double max_rel_err(const Tensor& analytic,
                          const std::vector<double>& numeric, double floor) {
  double worst = 0.0;
  const real* a = analytic.data();
  for (long i = 0; i < analytic.numel(); ++i) {
    const double av = static_cast<double>(a[i]);
    const double fv = numeric[static_cast<size_t>(i)];
    const double denom = std::max({std::abs(av), std::abs(fv), floor});
    worst = std::max(worst, std::abs(av - fv) / denom);
  }
  return worst;
}

}  // namespace fd
