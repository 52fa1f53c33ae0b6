#pragma once

#include <functional>
#include <vector>

#include "trice/tensor.hpp"

namespace trice {

/// Gradients of one backward pass, indexed by node id. Nodes that received
/// no gradient hold an undefined Tensor.
using GradMap = std::vector<Tensor>;

using BackwardFn = std::function<void(const Tensor& grad_out, GradMap& grads)>;

// Records executed ops in topological order (parents always precede their
// node). backward() replays the record once in reverse; the traversal is
// single-threaded and the accumulation order is fixed, so repeated passes
// over the same tape are bitwise identical. A tape belongs to one thread.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  /// Registers an op. Returns the new node id, or -1 when not recording.
  int add_node(std::vector<int> parents, BackwardFn back);

  /// Registers a gradient root (parameter or input). Returns a copy of `t`
  /// whose node field points at the new leaf.
  Tensor leaf(const Tensor& t);

  size_t size() const { return nodes_.size(); }

  /// Reverse-mode sweep from a scalar loss. Throws ContractError if the
  /// loss is not a scalar on this tape.
  GradMap backward(const Tensor& loss) const;

 private:
  struct Node {
    std::vector<int> parents;
    BackwardFn back;  // empty for leaves
  };

  bool recording_;
  std::vector<Node> nodes_;
};

/// grads[id] += contrib, initializing the slot on first touch.
void accumulate_grad(Tensor& slot, const Tensor& contrib);

}  // namespace trice
