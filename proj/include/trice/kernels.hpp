#pragma once

#include <cstdint>

#include "trice/common.hpp"

// Dense CPU kernels. Every kernel exists twice: a plain serial reference
// under kernels::serial, and an OpenMP-parallel version at kernels scope.
// Parallel loops split only across independent output elements, so both
// versions produce bitwise-identical results for identical inputs; the
// test suite asserts that and the bench target compares their speed.

namespace trice::kernels {

namespace serial {

// C[m x n] = A[m x k] * B[k x n]
void matmul(int m, int k, int n, const real* A, const real* B, real* C);
// C[m x n] = A[m x k] * B[n x k]^T
void matmul_nt(int m, int k, int n, const real* A, const real* B, real* C);
// C[k x n] = A[m x k]^T * B[m x n]
void matmul_tn(int m, int k, int n, const real* A, const real* B, real* C);

void transpose(int m, int n, const real* A, real* C);

// Row-stabilized softmax. `keep` (0/1, same shape) marks positions that may
// receive probability; null keeps everything. Rows with no kept position
// come out all-zero; the return value counts them.
int softmax_rows(int m, int n, const real* A, const unsigned char* keep,
                 real* Y);

// Per-row mean/variance normalization with affine output. mean/rstd are
// cached per row for the backward pass.
void layer_norm_rows(int m, int n, const real* X, const real* gain,
                     const real* bias, real eps, real* Y, real* mean,
                     real* rstd);

void gelu(long n, const real* X, real* Y);
void gelu_grad(long n, const real* X, const real* G, real* DX);

void add(long n, const real* A, const real* B, real* C);
void scale(long n, real a, const real* X, real* Y);
void axpy(long n, real a, const real* X, real* Y);  // Y += a*X
void add_rowvec(int m, int n, const real* A, const real* b, real* C);
void colsum(int m, int n, const real* A, real* out);

}  // namespace serial

void matmul(int m, int k, int n, const real* A, const real* B, real* C);
void matmul_nt(int m, int k, int n, const real* A, const real* B, real* C);
void matmul_tn(int m, int k, int n, const real* A, const real* B, real* C);
void transpose(int m, int n, const real* A, real* C);
int softmax_rows(int m, int n, const real* A, const unsigned char* keep,
                 real* Y);
void layer_norm_rows(int m, int n, const real* X, const real* gain,
                     const real* bias, real eps, real* Y, real* mean,
                     real* rstd);
void gelu(long n, const real* X, real* Y);
void gelu_grad(long n, const real* X, const real* G, real* DX);
void add(long n, const real* A, const real* B, real* C);
void scale(long n, real a, const real* X, real* Y);
void axpy(long n, real a, const real* X, real* Y);
void add_rowvec(int m, int n, const real* A, const real* b, real* C);
void colsum(int m, int n, const real* A, real* out);

}  // namespace trice::kernels
