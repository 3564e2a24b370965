#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "eqa/tensor.hpp"

// Reverse-mode differentiation over a per-forward-pass tape. Nodes are
// appended in evaluation order, so the reverse of creation order is a valid
// topological order for backpropagation.
namespace eqa::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Called once during backward with the node's own id; the closure reads
  // grad(self) and accumulates into grad(input) for inputs that need it.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradient buffer of a node, zero-initialized on first access.
  Tensor& grad(std::size_t id);

  // Reverse sweep from a single-element loss. May be called once per tape.
  void backward(Var loss);

  // d(loss)/d(var) after backward(); zeros when var is not on the loss path.
  Tensor gradient(Var var) const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Elementwise binary ops broadcast numpy-style over operands of equal rank:
// each axis must match or be 1 on one side.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var add_scalar(Var a, double c);
Var scale(Var a, double c);
Var neg(Var a);
Var square(Var a);

// a has shape [..., K], w has shape [K, O]; result has shape [..., O].
Var matmul(Var a, Var w);

Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);

// Reductions keep the reduced axis with extent 1.
Var sum(Var a, std::size_t axis);
Var mean(Var a, std::size_t axis);
Var max(Var a, std::size_t axis);
Var sum_all(Var a);

// Numerically stable softmax along one axis.
Var softmax(Var a, std::size_t axis);

Var reshape(Var a, Shape shape);

// Gathers the listed positions along an axis (repeats allowed); backward
// scatters and accumulates.
Var index_select(Var a, std::size_t axis, std::vector<std::size_t> indices);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

// Splits a shape around an axis into (outer, extent, inner) loop counts.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};
AxisSplit split_axis(const Shape& shape, std::size_t axis);

}  // namespace eqa::ad
