#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "nff/tensor.hpp"

namespace nff {

/// A trainable tensor. `grad` always has the shape of `value`.
struct Param {
  std::string name;
  Tensor3 value;
  Tensor3 grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, Tensor3 v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), trainable(train) {}

  void zero_grad() { grad = Tensor3(value.shape()); }
};

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor3& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Gradient of the loss with respect to each Param leaf on the tape.
using GradientMap = std::unordered_map<const Param*, Tensor3>;

/// Append-only record of a forward computation. One tape per update step.
class Tape {
 public:
  /// Called once during backward with the node's accumulated output gradient.
  using BackwardFn = std::function<void(Tape&, const Tensor3& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor3 value);
  /// References `p.value` without copying; `p` must outlive the tape.
  Var leaf(const Param& p);

  Var record(Tensor3 value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor3& value(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Adds `g` into node `id`'s gradient accumulator (no-op for constants).
  void accumulate(std::size_t id, const Tensor3& g);
  void accumulate(std::size_t id, Tensor3&& g);
  /// Gradient of the last backward pass; zeros if the node was unreachable.
  Tensor3 grad(Var v) const;

  GradientMap backward(Var loss);

 private:
  struct Node {
    Tensor3 owned;
    const Tensor3* ref = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    const Param* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  std::vector<Tensor3> grads_;
};

/// Free function form of Tape::backward. The loss must be (1,1,1).
GradientMap backward(Tape& tape, Var loss);

/// Copies gradients from `grads` into each param's `grad` (zero where absent).
void store_gradients(const GradientMap& grads, const std::vector<Param*>& params);

enum class UnaryOp { Neg, Exp, Log, Tanh, Sigmoid, Square };
enum class BinaryOp { Add, Sub, Mul };

Var elementwise(UnaryOp op, Var a);
/// Each extent of `a` and `b` must be equal or 1; adjoints sum over broadcast dims.
Var elementwise(BinaryOp op, Var a, Var b);

inline Var add(Var a, Var b) { return elementwise(BinaryOp::Add, a, b); }
inline Var sub(Var a, Var b) { return elementwise(BinaryOp::Sub, a, b); }
inline Var mul(Var a, Var b) { return elementwise(BinaryOp::Mul, a, b); }
inline Var neg(Var a) { return elementwise(UnaryOp::Neg, a); }
inline Var exp(Var a) { return elementwise(UnaryOp::Exp, a); }
inline Var log(Var a) { return elementwise(UnaryOp::Log, a); }
inline Var tanh(Var a) { return elementwise(UnaryOp::Tanh, a); }
inline Var sigmoid(Var a) { return elementwise(UnaryOp::Sigmoid, a); }
inline Var square(Var a) { return elementwise(UnaryOp::Square, a); }

Var add_scalar(Var a, double c);
Var scale(Var a, double c);
/// max(a, floor); the gradient is zero where the floor is active.
Var clamp_min(Var a, double floor);

/// (MB,TB,p) x (MB,p,q) -> (MB,TB,q). Either batch extent may be 1.
Var matmul_batched(Var a, Var b);
Var reshape(Var a, Shape shape);
/// Concatenate along the last dim; `b`'s leading dims may be 1 and broadcast.
Var concat_last(Var a, Var b);

Var sum(Var a);
Var mean(Var a);
/// Mean of squared differences over every element.
Var mse(Var prediction, Var target);

/// Max over all trainable parameter scalars of |ad - fd| / max(1, |ad|, |fd|),
/// with fd the central difference. `loss` builds a scalar on the given tape
/// using `Tape::leaf` for each param.
double grad_check(const std::function<Var(Tape&)>& loss, const std::vector<Param*>& params,
                  double h);

}  // namespace nff
