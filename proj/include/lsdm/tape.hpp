#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "lsdm/tensor.hpp"

namespace lsdm::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Tensor::Shape& shape() const { return value().shape(); }
};

/// Append-only record of primitive operations. Nodes are stored in creation
/// order, so walking the vector backwards is a reverse topological order.
///
/// A tape is single-threaded. Separate tapes share nothing but the external
/// parameter tensors they read, so they can run concurrently as long as each
/// one writes its gradients into its own sinks.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);

  /// Leaf reading `value` in place (it must outlive the tape). After
  /// backward() its gradient is added into `*grad_sink` when non-null.
  Var parameter(const Tensor& value, Tensor* grad_sink);

  /// Owned leaf that receives a gradient, readable through Var::grad().
  Var variable(Tensor value);

  /// Record the result of a primitive. `inputs` decide whether the node needs
  /// a gradient; `backward` is dropped when none of them do.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward);
  Var record(std::string_view op, Tensor value, std::span<const Var> inputs,
             BackwardFn backward);

  /// Reverse sweep from a scalar output. `on_visit` sees each node whose
  /// backward runs, in visiting order.
  void backward(Var output, const std::function<void(std::size_t)>& on_visit = {});

  const Tensor& value(std::size_t id) const;
  const Tensor& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient accumulator of a node, zero-allocated on first use.
  Tensor& grad_buffer(std::size_t id);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    Tensor* sink = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };

  const Tensor& node_value(const Node& n) const { return n.external ? *n.external : n.value; }
  Var push(Node node);

  std::vector<Node> nodes_;
};

// Primitives. Every one checks operand shapes (ShapeError naming the operands)
// and that its result is finite (NumericError naming the op).

/// [r,c]x[c] -> [r] or [r,c]x[c,k] -> [r,k].
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Elementwise max; ties send the gradient to `a`.
Var maximum(Var a, Var b);
/// alpha * a + beta.
Var affine(Var a, double alpha, double beta = 0.0);
Var sum(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
/// Softmax over a rank-1 tensor.
Var softmax(Var a);
Var log(Var a);
/// Clamp into [lo, hi]; gradient passes only where the input was inside.
Var clip(Var a, double lo, double hi);
/// Concatenate rank-1 tensors.
Var concat(std::span<const Var> parts);
/// Contiguous slice [begin, begin+len) of a rank-1 tensor.
Var slice(Var a, std::size_t begin, std::size_t len);
/// Rows [begin, begin+count) of a matrix.
Var slice_rows(Var a, std::size_t begin, std::size_t count);
/// Zero-pad a rank-1 tensor at the end up to `total` entries.
Var pad(Var a, std::size_t total);
/// Reinterpret with a new shape of the same size.
Var reshape(Var a, Tensor::Shape shape);
/// Select matrix rows by index; repeated indices accumulate in backward.
Var gather_rows(Var a, std::span<const std::size_t> rows);

}  // namespace lsdm::ad
