#include "trice/kernels.hpp"

#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace trice::kernels {

// Shared row-range bodies. Serial entry points run the full range; the
// OpenMP entry points split the same body across rows, so each output
// element sees the exact same operation order either way.

namespace {

constexpr long kParallelFlops = 1L << 15;
constexpr real kSqrt2OverPi = real(0.7978845608028654);
constexpr real kGeluCubic = real(0.044715);

inline void matmul_row_range(int r0, int r1, int k, int n, const real* A,
                             const real* B, real* C) {
  for (int i = r0; i < r1; ++i) {
    real* ci = C + static_cast<long>(i) * n;
    for (int j = 0; j < n; ++j) ci[j] = real(0);
    const real* ai = A + static_cast<long>(i) * k;
    for (int l = 0; l < k; ++l) {
      const real a = ai[l];
      const real* bl = B + static_cast<long>(l) * n;
      for (int j = 0; j < n; ++j) ci[j] += a * bl[j];
    }
  }
}

inline void matmul_nt_row_range(int r0, int r1, int k, int n, const real* A,
                                const real* B, real* C) {
  for (int i = r0; i < r1; ++i) {
    const real* ai = A + static_cast<long>(i) * k;
    real* ci = C + static_cast<long>(i) * n;
    for (int j = 0; j < n; ++j) {
      const real* bj = B + static_cast<long>(j) * k;
      real s = real(0);
      for (int l = 0; l < k; ++l) s += ai[l] * bj[l];
      ci[j] = s;
    }
  }
}

// C[k x n] = A^T * B; the parallel split is over rows of C (columns of A).
inline void matmul_tn_body(int k, int n, int l0, int l1, int m, const real* A,
                           const real* B, real* C) {
  for (int l = l0; l < l1; ++l) {
    real* cl = C + static_cast<long>(l) * n;
    for (int j = 0; j < n; ++j) cl[j] = real(0);
    for (int i = 0; i < m; ++i) {
      const real a = A[static_cast<long>(i) * k + l];
      const real* bi = B + static_cast<long>(i) * n;
      for (int j = 0; j < n; ++j) cl[j] += a * bi[j];
    }
  }
}

inline int softmax_row_range(int r0, int r1, int n, const real* A,
                             const unsigned char* keep, real* Y) {
  int dead_rows = 0;
  for (int i = r0; i < r1; ++i) {
    const real* xi = A + static_cast<long>(i) * n;
    const unsigned char* ki = keep ? keep + static_cast<long>(i) * n : nullptr;
    real* yi = Y + static_cast<long>(i) * n;
    real mx = -std::numeric_limits<real>::infinity();
    for (int j = 0; j < n; ++j)
      if ((!ki || ki[j]) && xi[j] > mx) mx = xi[j];
    if (!(mx > -std::numeric_limits<real>::infinity())) {
      for (int j = 0; j < n; ++j) yi[j] = real(0);
      ++dead_rows;
      continue;
    }
    real sum = real(0);
    for (int j = 0; j < n; ++j) {
      const real e = (!ki || ki[j]) ? std::exp(xi[j] - mx) : real(0);
      yi[j] = e;
      sum += e;
    }
    const real inv = real(1) / sum;
    for (int j = 0; j < n; ++j) yi[j] *= inv;
  }
  return dead_rows;
}

inline void layer_norm_row_range(int r0, int r1, int n, const real* X,
                                 const real* gain, const real* bias, real eps,
                                 real* Y, real* mean, real* rstd) {
  for (int i = r0; i < r1; ++i) {
    const real* xi = X + static_cast<long>(i) * n;
    real* yi = Y + static_cast<long>(i) * n;
    real mu = real(0);
    for (int j = 0; j < n; ++j) mu += xi[j];
    mu /= real(n);
    real var = real(0);
    for (int j = 0; j < n; ++j) {
      const real dxy = xi[j] - mu;
      var += dxy * dxy;
    }
    var /= real(n);
    const real rs = real(1) / std::sqrt(var + eps);
    mean[i] = mu;
    rstd[i] = rs;
    for (int j = 0; j < n; ++j) yi[j] = gain[j] * ((xi[j] - mu) * rs) + bias[j];
  }
}

inline real gelu_one(real x) {
  const real u = kSqrt2OverPi * (x + kGeluCubic * x * x * x);
  return real(0.5) * x * (real(1) + std::tanh(u));
}

inline real gelu_grad_one(real x) {
  const real u = kSqrt2OverPi * (x + kGeluCubic * x * x * x);
  const real t = std::tanh(u);
  const real du = kSqrt2OverPi * (real(1) + real(3) * kGeluCubic * x * x);
  return real(0.5) * (real(1) + t) + real(0.5) * x * (real(1) - t * t) * du;
}

}  // namespace

namespace serial {

void matmul(int m, int k, int n, const real* A, const real* B, real* C) {
  matmul_row_range(0, m, k, n, A, B, C);
}

void matmul_nt(int m, int k, int n, const real* A, const real* B, real* C) {
  matmul_nt_row_range(0, m, k, n, A, B, C);
}

void matmul_tn(int m, int k, int n, const real* A, const real* B, real* C) {
  matmul_tn_body(k, n, 0, k, m, A, B, C);
}

void transpose(int m, int n, const real* A, real* C) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      C[static_cast<long>(j) * m + i] = A[static_cast<long>(i) * n + j];
}

int softmax_rows(int m, int n, const real* A, const unsigned char* keep,
                 real* Y) {
  return softmax_row_range(0, m, n, A, keep, Y);
}

void layer_norm_rows(int m, int n, const real* X, const real* gain,
                     const real* bias, real eps, real* Y, real* mean,
                     real* rstd) {
  layer_norm_row_range(0, m, n, X, gain, bias, eps, Y, mean, rstd);
}

void gelu(long n, const real* X, real* Y) {
  for (long i = 0; i < n; ++i) Y[i] = gelu_one(X[i]);
}

void gelu_grad(long n, const real* X, const real* G, real* DX) {
  for (long i = 0; i < n; ++i) DX[i] = G[i] * gelu_grad_one(X[i]);
}

void add(long n, const real* A, const real* B, real* C) {
  for (long i = 0; i < n; ++i) C[i] = A[i] + B[i];
}

void scale(long n, real a, const real* X, real* Y) {
  for (long i = 0; i < n; ++i) Y[i] = a * X[i];
}

void axpy(long n, real a, const real* X, real* Y) {
  for (long i = 0; i < n; ++i) Y[i] += a * X[i];
}

void add_rowvec(int m, int n, const real* A, const real* b, real* C) {
  for (int i = 0; i < m; ++i) {
    const real* ai = A + static_cast<long>(i) * n;
    real* ci = C + static_cast<long>(i) * n;
    for (int j = 0; j < n; ++j) ci[j] = ai[j] + b[j];
  }
}

void colsum(int m, int n, const real* A, real* out) {
  for (int j = 0; j < n; ++j) out[j] = real(0);
  for (int i = 0; i < m; ++i) {
    const real* ai = A + static_cast<long>(i) * n;
    for (int j = 0; j < n; ++j) out[j] += ai[j];
  }
}

}  // namespace serial

void matmul(int m, int k, int n, const real* A, const real* B, real* C) {
  const long work = static_cast<long>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelFlops)
  for (int i = 0; i < m; ++i) matmul_row_range(i, i + 1, k, n, A, B, C);
}

void matmul_nt(int m, int k, int n, const real* A, const real* B, real* C) {
  const long work = static_cast<long>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelFlops)
  for (int i = 0; i < m; ++i) matmul_nt_row_range(i, i + 1, k, n, A, B, C);
}

void matmul_tn(int m, int k, int n, const real* A, const real* B, real* C) {
  const long work = static_cast<long>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelFlops)
  for (int l = 0; l < k; ++l) matmul_tn_body(k, n, l, l + 1, m, A, B, C);
}

void transpose(int m, int n, const real* A, real* C) {
  serial::transpose(m, n, A, C);
}

int softmax_rows(int m, int n, const real* A, const unsigned char* keep,
                 real* Y) {
  const long work = static_cast<long>(m) * n;
  if (work <= kParallelFlops) return softmax_row_range(0, m, n, A, keep, Y);
  int dead = 0;
#pragma omp parallel for schedule(static) reduction(+ : dead)
  for (int i = 0; i < m; ++i) dead += softmax_row_range(i, i + 1, n, A, keep, Y);
  return dead;
}

void layer_norm_rows(int m, int n, const real* X, const real* gain,
                     const real* bias, real eps, real* Y, real* mean,
                     real* rstd) {
  const long work = static_cast<long>(m) * n;
#pragma omp parallel for schedule(static) if (work > kParallelFlops)
  for (int i = 0; i < m; ++i)
    layer_norm_row_range(i, i + 1, n, X, gain, bias, eps, Y, mean, rstd);
}

void gelu(long n, const real* X, real* Y) {
#pragma omp parallel for schedule(static) if (n > kParallelFlops)
  for (long i = 0; i < n; ++i) Y[i] = gelu_one(X[i]);
}

void gelu_grad(long n, const real* X, const real* G, real* DX) {
#pragma omp parallel for schedule(static) if (n > kParallelFlops)
  for (long i = 0; i < n; ++i) DX[i] = G[i] * gelu_grad_one(X[i]);
}

void add(long n, const real* A, const real* B, real* C) {
#pragma omp parallel for schedule(static) if (n > kParallelFlops)
  for (long i = 0; i < n; ++i) C[i] = A[i] + B[i];
}

void scale(long n, real a, const real* X, real* Y) {
#pragma omp parallel for schedule(static) if (n > kParallelFlops)
  for (long i = 0; i < n; ++i) Y[i] = a * X[i];
}

void axpy(long n, real a, const real* X, real* Y) {
#pragma omp parallel for schedule(static) if (n > kParallelFlops)
  for (long i = 0; i < n; ++i) Y[i] += a * X[i];
}

void add_rowvec(int m, int n, const real* A, const real* b, real* C) {
  const long work = static_cast<long>(m) * n;
#pragma omp parallel for schedule(static) if (work > kParallelFlops)
  for (int i = 0; i < m; ++i) {
    const real* ai = A + static_cast<long>(i) * n;
    real* ci = C + static_cast<long>(i) * n;
    for (int j = 0; j < n; ++j) ci[j] = ai[j] + b[j];
  }
}

void colsum(int m, int n, const real* A, real* out) {
  serial::colsum(m, n, A, out);
}

}  // namespace trice::kernels
