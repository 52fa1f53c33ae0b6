#pragma once

#include <memory>
#include <vector>

#include "trice/common.hpp"

namespace trice {

// Dense row-major tensor. Copies share the underlying buffer; writes go
// through mut(), which unshares first, so values behave immutably at the
// interface. `node` is an optional handle into the active tape (-1 when
// the tensor is a detached constant).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<real> values);

  static Tensor scalar(real v);
  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, real v);

  bool defined() const { return buf_ != nullptr; }
  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  long numel() const { return numel_; }

  // Rank-2 helpers.
  int rows() const;
  int cols() const;
  real at(int r, int c) const;

  real item() const;  // rank-0 / single-element access

  const real* data() const;
  real* mut();  // copy-on-write

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  int node = -1;

 private:
  std::vector<int> shape_;
  long numel_ = 0;
  std::shared_ptr<std::vector<real>> buf_;
};

/// Throws NumericError if `t` holds NaN/Inf. No-op unless checked mode is on.
void maybe_check_finite(const Tensor& t, const char* where);

/// Unconditional finite scan (used by the trainer's divergence guard).
bool all_finite(const Tensor& t);

}  // namespace trice
