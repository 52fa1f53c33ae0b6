// Timing comparison of the serial reference kernels against the OpenMP
// versions. Build with Release; run with OMP_NUM_THREADS to vary threads.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "trice/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using trice::real;
namespace k = trice::kernels;

namespace {

using Clock = std::chrono::steady_clock;

std::vector<real> randn(long n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<real> v(static_cast<size_t>(n));
  for (auto& x : v) x = static_cast<real>(d(rng));
  return v;
}

template <class F>
double time_ms(F&& body, int reps) {
  body();  // warm up
  const auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) body();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (OpenMP off)\n");
#endif
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel",
              "speedup");

  {
    const int m = 1024, kk = 64, n = 256;
    auto a = randn(static_cast<long>(m) * kk, 1);
    auto b = randn(static_cast<long>(kk) * n, 2);
    std::vector<real> c(static_cast<size_t>(m) * n);
    row("matmul 1024x64x256",
        time_ms([&] { k::serial::matmul(m, kk, n, a.data(), b.data(), c.data()); }, 20),
        time_ms([&] { k::matmul(m, kk, n, a.data(), b.data(), c.data()); }, 20));
  }
  {
    const int m = 512, kk = 64, n = 512;
    auto a = randn(static_cast<long>(m) * kk, 3);
    auto b = randn(static_cast<long>(n) * kk, 4);
    std::vector<real> c(static_cast<size_t>(m) * n);
    row("matmul_nt 512x64x512",
        time_ms([&] { k::serial::matmul_nt(m, kk, n, a.data(), b.data(), c.data()); }, 20),
        time_ms([&] { k::matmul_nt(m, kk, n, a.data(), b.data(), c.data()); }, 20));
  }
  {
    const int m = 4096, n = 256;
    auto a = randn(static_cast<long>(m) * n, 5);
    std::vector<real> y(static_cast<size_t>(m) * n);
    row("softmax_rows 4096x256",
        time_ms([&] { k::serial::softmax_rows(m, n, a.data(), nullptr, y.data()); }, 20),
        time_ms([&] { k::softmax_rows(m, n, a.data(), nullptr, y.data()); }, 20));
  }
  {
    const int m = 4096, n = 256;
    auto a = randn(static_cast<long>(m) * n, 6);
    auto g = randn(n, 7);
    auto b = randn(n, 8);
    std::vector<real> y(static_cast<size_t>(m) * n), mu(m), rs(m);
    row("layer_norm 4096x256",
        time_ms([&] { k::serial::layer_norm_rows(m, n, a.data(), g.data(), b.data(),
                                                 real(1e-5), y.data(), mu.data(), rs.data()); }, 20),
        time_ms([&] { k::layer_norm_rows(m, n, a.data(), g.data(), b.data(),
                                         real(1e-5), y.data(), mu.data(), rs.data()); }, 20));
  }
  {
    const long n = 1L << 22;
    auto a = randn(n, 9);
    std::vector<real> y(static_cast<size_t>(n));
    row("gelu 4M",
        time_ms([&] { k::serial::gelu(n, a.data(), y.data()); }, 10),
        time_ms([&] { k::gelu(n, a.data(), y.data()); }, 10));
  }
  return 0;
}
