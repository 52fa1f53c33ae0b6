#include "trice/tape.hpp"

#include "trice/kernels.hpp"

namespace trice {

int Tape::add_node(std::vector<int> parents, BackwardFn back) {
  if (!recording_) return -1;
  nodes_.push_back(Node{std::move(parents), std::move(back)});
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::leaf(const Tensor& t) {
  Tensor out = t;
  out.node = add_node({}, BackwardFn{});
  return out;
}

GradMap Tape::backward(const Tensor& loss) const {
  if (loss.node < 0 || loss.node >= static_cast<int>(nodes_.size()))
    throw ContractError("backward: loss is not on this tape");
  if (loss.numel() != 1)
    throw ContractError("backward: loss must be a scalar");

  GradMap grads(nodes_.size());
  grads[static_cast<size_t>(loss.node)] = Tensor::scalar(real(1));
  for (int id = loss.node; id >= 0; --id) {
    const Node& node = nodes_[static_cast<size_t>(id)];
    if (!node.back) continue;  // leaf
    const Tensor& g = grads[static_cast<size_t>(id)];
    if (!g.defined()) continue;  // node not on the path to the loss
    node.back(g, grads);
  }
  return grads;
}

void accumulate_grad(Tensor& slot, const Tensor& contrib) {
  if (!slot.defined()) {
    slot = contrib;
    return;
  }
  if (!slot.same_shape(contrib))
    throw ShapeError("gradient shape mismatch during accumulation");
  real* out = slot.mut();
  kernels::add(slot.numel(), out, contrib.data(), out);
}

}  // namespace trice
