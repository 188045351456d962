#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "a2mae/tensor.hpp"

namespace a2mae::nn {

// Trainable array with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool decay = true;  // subject to decoupled weight decay

  Parameter() = default;
  Parameter(std::string n, Tensor v, bool wd = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape(), 0.0), decay(wd) {}

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records forward operations in topological order and replays them in reverse.
// One tape is one single-owner computation context.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  // Leaf bound to `p`; backward() adds its gradient into p.grad.
  Var parameter(Parameter& p);

  // Seeds d(loss)/d(loss) = 1 and propagates. Fails if called twice without reset().
  void backward(const Var& loss);
  void reset();

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::size_t>& inputs_of(std::size_t id) const { return nodes_.at(id).inputs; }

  // Op-implementation interface.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);
  const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad_of(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of `id`, allocated as zeros on first use.
  Tensor& grad_buffer(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* sink = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Var add_leaf(Tensor value, bool requires_grad, Parameter* sink);

  std::deque<Node> nodes_;
  bool grad_enabled_;
  bool backward_done_ = false;
};

// Forward ops. Binary elementwise ops accept identical shapes or a right-hand
// operand whose shape equals the trailing dimensions of the left one.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(const Var& a, std::size_t axis, std::size_t start, std::size_t length);
Var softmax(const Var& a, std::size_t axis);
Var layernorm(const Var& a, std::size_t axis, double eps = 1e-6);
Var gelu(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
// Rows of a rank-2 tensor, in index order (repeats allowed).
Var gather_rows(const Var& a, const std::vector<std::size_t>& rows);
// Column-wise mean of a rank-2 tensor, shape [1, cols].
Var mean_rows(const Var& a);
// Mean squared error over entries where mask != 0.
Var mse(const Var& pred, const Var& target, const Tensor& mask);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

}  // namespace a2mae::nn
