#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "tpa/tensor.hpp"

namespace tpa {

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; valid as long as the
// tape it points into is alive.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  Tape& tape() const;
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const std::vector<Index>& shape() const { return value().shape(); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Records the forward computation as an ordered op list. Operations are
// appended in execution order, so every input precedes its consumers and a
// single reverse sweep visits each node exactly once.
class Tape {
 public:
  // Called with the tape and the id of the op's output node; reads the
  // output gradient and accumulates into the input gradients.
  using BackwardFn = std::function<void(Tape&, int)>;

  // Copies the value in; on backward, accumulates into t.grad() if
  // t.requires_grad(). The referenced tensor must outlive the tape.
  Var leaf(const Tensor& t);

  // A value with no gradient sink (model inputs, literals).
  Var constant(Tensor t);

  Var record(Tensor value, std::vector<int> inputs, BackwardFn backward);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  // Gradient buffer for a node, zero-initialised on first access.
  // Only meaningful during/after backward().
  ArrayXd& grad(int id);
  bool grad_allocated(int id) const { return grads_[static_cast<std::size_t>(id)].has_value(); }

  // Seeds d(root)/d(root) = 1 (root must hold exactly one value), sweeps the
  // op list in reverse, then adds leaf gradients into their sink tensors.
  void backward(const Var& root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* sink = nullptr;
    std::vector<int> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  std::vector<std::optional<ArrayXd>> grads_;
};

}  // namespace tpa
