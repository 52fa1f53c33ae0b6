#include "trice/tensor.hpp"

#include <atomic>
#include <cmath>

namespace trice {

namespace {
std::atomic<bool> g_checked{false};

long shape_numel(const std::vector<int>& shape) {
  long n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension");
    n *= d;
  }
  return n;
}
}  // namespace

bool checked_mode() { return g_checked.load(std::memory_order_relaxed); }
void set_checked_mode(bool on) {
  g_checked.store(on, std::memory_order_relaxed);
}

std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return mix_seed(seed ^ mix_seed(salt));
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), numel_(shape_numel(shape_)) {
  buf_ = std::make_shared<std::vector<real>>(static_cast<size_t>(numel_),
                                             real(0));
}

Tensor::Tensor(std::vector<int> shape, std::vector<real> values)
    : shape_(std::move(shape)), numel_(shape_numel(shape_)) {
  if (numel_ != static_cast<long>(values.size()))
    throw ShapeError("value count does not match shape");
  buf_ = std::make_shared<std::vector<real>>(std::move(values));
}

Tensor Tensor::scalar(real v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, real v) {
  Tensor t(std::move(shape));
  real* p = t.mut();
  for (long i = 0; i < t.numel(); ++i) p[i] = v;
  return t;
}

int Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() requires a rank-2 tensor");
  return shape_[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() requires a rank-2 tensor");
  return shape_[1];
}

real Tensor::at(int r, int c) const {
  return (*buf_)[static_cast<size_t>(r) * static_cast<size_t>(cols()) +
                 static_cast<size_t>(c)];
}

real Tensor::item() const {
  if (numel_ != 1) throw ShapeError("item() requires a single-element tensor");
  return (*buf_)[0];
}

const real* Tensor::data() const {
  if (!buf_) throw ContractError("access to undefined tensor");
  return buf_->data();
}

real* Tensor::mut() {
  if (!buf_) throw ContractError("access to undefined tensor");
  if (buf_.use_count() > 1) buf_ = std::make_shared<std::vector<real>>(*buf_);
  return buf_->data();
}

bool all_finite(const Tensor& t) {
  const real* p = t.data();
  for (long i = 0; i < t.numel(); ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

void maybe_check_finite(const Tensor& t, const char* where) {
  if (!checked_mode()) return;
  if (!all_finite(t))
    throw NumericError(std::string("non-finite value produced by ") + where);
}

}  // namespace trice
