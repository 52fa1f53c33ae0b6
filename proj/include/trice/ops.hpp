#pragma once

#include <cstdint>
#include <vector>

#include "trice/tape.hpp"

// Differentiable tensor ops. Each op computes its value with the parallel
// kernels and, when the tape is recording and at least one input is a tape
// node, registers a backward rule. Inputs are never mutated. Ops accept
// detached constants (node == -1) anywhere; no gradient flows into them.

namespace trice::ops {

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b);
/// a[m x k] * b[n x k]^T without materializing the transpose.
Tensor matmul_nt(Tape& t, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& t, const Tensor& a);

Tensor add(Tape& t, const Tensor& a, const Tensor& b);
Tensor mul(Tape& t, const Tensor& a, const Tensor& b);  // elementwise
Tensor add_n(Tape& t, const std::vector<Tensor>& xs);
/// a[m x n] + bias[n] broadcast over rows.
Tensor add_rowvec(Tape& t, const Tensor& a, const Tensor& bias);
Tensor scale(Tape& t, const Tensor& a, real c);

Tensor slice_rows(Tape& t, const Tensor& a, int r0, int r1);
Tensor concat_rows(Tape& t, const std::vector<Tensor>& parts);
/// Rectangular block a[r0:r1, c0:c1].
Tensor block(Tape& t, const Tensor& a, int r0, int r1, int c0, int c1);
Tensor concat_cols(Tape& t, const std::vector<Tensor>& parts);

/// Row softmax with optional 0/1 keep-mask (a detached tensor of the same
/// shape). Rows with no kept position come out all-zero and bump the
/// dead-row diagnostic counter.
Tensor softmax_rows(Tape& t, const Tensor& a, const Tensor* keep = nullptr);

Tensor layer_norm(Tape& t, const Tensor& x, const Tensor& gain,
                  const Tensor& bias, real eps);

Tensor gelu(Tape& t, const Tensor& x);

/// Inverted dropout with an explicit seeded mask; rate 0 is the identity.
Tensor dropout(Tape& t, const Tensor& x, real rate, std::uint64_t seed);

/// Gather of table rows; backward scatter-adds into the table gradient.
Tensor embedding_lookup(Tape& t, const Tensor& table,
                        const std::vector<int>& ids);

/// Mean over non-pad positions of -log softmax(logits)[target]. Wraps the
/// weighted form with weight 1/#non-pad on every non-pad row.
Tensor cross_entropy(Tape& t, const Tensor& logits,
                     const std::vector<int>& targets, int pad_id);

/// Sum over rows of weights[i] * -log softmax(logits_i)[targets_i]; pad
/// rows must carry weight 0. Optionally reports each row's target
/// log-probability (0 at pads).
Tensor cross_entropy_weighted(Tape& t, const Tensor& logits,
                              const std::vector<int>& targets, int pad_id,
                              const std::vector<real>& weights,
                              std::vector<real>* row_logprob = nullptr);

Tensor sum_all(Tape& t, const Tensor& a);

/// Count of all-masked softmax rows seen on this thread since the last
/// reset. Only malformed inputs can produce them.
long dead_softmax_rows();
void reset_dead_softmax_rows();

}  // namespace trice::ops
