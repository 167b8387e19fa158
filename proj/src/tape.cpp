#include "tpa/tape.hpp"

namespace tpa {

const Tensor& Var::value() const { return tape_->value(id_); }

Tape& Var::tape() const { return *tape_; }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  grads_.emplace_back();
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(const Tensor& t) {
  Node n;
  n.value = t;
  n.sink = &t;
  n.requires_grad = t.requires_grad();
  return push(std::move(n));
}

Var Tape::constant(Tensor t) {
  Node n;
  n.value = std::move(t);
  n.value.set_requires_grad(false);
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::vector<int> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  n.backward = std::move(backward);
  for (int i : n.inputs) {
    if (nodes_[static_cast<std::size_t>(i)].requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  return push(std::move(n));
}

ArrayXd& Tape::grad(int id) {
  auto& g = grads_[static_cast<std::size_t>(id)];
  if (!g) g = ArrayXd::Zero(nodes_[static_cast<std::size_t>(id)].value.size());
  return *g;
}

void Tape::backward(const Var& root) {
  if (!root.valid() || root.tape_ != this) throw NumericError("backward root is not on this tape");
  if (root.value().size() != 1) {
    throw DimensionError("backward root must be scalar, got " + shape_str(root.value().shape()));
  }
  for (auto& g : grads_) g.reset();
  grad(root.id())(0) = 1.0;

  for (int id = root.id(); id >= 0; --id) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.requires_grad || !node.backward) continue;
    if (!grads_[static_cast<std::size_t>(id)]) continue;  // no upstream contribution; gradient is zero
    node.backward(*this, id);
  }

  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const auto& node = nodes_[id];
    if (!node.sink || !node.sink->requires_grad()) continue;
    ArrayXd& sink_grad = node.sink->grad();  // materialise zeros even if untouched
    if (grads_[id]) sink_grad += *grads_[id];
  }
}

}  // namespace tpa
