#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "authorgan/tensor.hpp"

namespace authorgan {

enum class OpKind {
  leaf,
  add,
  sub,
  mul,
  div,
  scale,
  matmul,
  transpose,
  reshape,
  sum_to,
  broadcast_to,
  exp,
  log,
  tanh,
  sigmoid,
  relu,
  leaky_relu,
  elu,
  abs,
  sqrt,
  square,
  clamp,
  conv2d,
  conv_input_adjoint,
  conv_kernel_adjoint,
  pool_sum,
  pool_sum_adjoint,
  gather,
  scatter,
  concat,
  narrow,
  pad_narrow,
};

std::string_view op_name(OpKind kind);

class Var;

/// One recorded operation. Gradient rules are written in terms of Var
/// operations, so running them with recording enabled yields a differentiable
/// gradient graph (used for input-gradient penalties).
struct Node {
  using BackwardFn = std::function<std::vector<Var>(const Var& self, const Var& grad_out)>;

  OpKind op = OpKind::leaf;
  Tensor value;
  std::optional<Tensor> grad;
  bool requires_grad = false;
  std::vector<Var> inputs;
  BackwardFn backward;
};

/// Shared handle to a graph node. A default-constructed Var is undefined.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  /// Mutable access for optimizers and weight clipping; never call on a
  /// non-leaf node that is still part of a live graph.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  OpKind op() const { return node_->op; }
  const std::vector<Var>& inputs() const { return node_->inputs; }

  const std::optional<Tensor>& grad() const { return node_->grad; }
  /// Accumulated gradient, or zeros when the node was never reached.
  Tensor grad_or_zero() const;
  void zero_grad() { node_->grad.reset(); }

  Node* node() const noexcept { return node_.get(); }
  long use_count() const noexcept { return node_.use_count(); }
  bool same_node(const Var& other) const noexcept { return node_ == other.node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Leaf that does not require gradients.
Var constant(Tensor value);
/// Leaf that accumulates gradients.
Var parameter(Tensor value);

/// Graph recording switch (thread local). When disabled, operations return
/// constant leaves.
bool grad_enabled() noexcept;

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

struct NoGrad : GradModeGuard {
  NoGrad() : GradModeGuard(false) {}
};

// Elementwise with broadcasting (see broadcast_shapes). Division by zero
// yields IEEE infinities/NaNs.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
Var neg(const Var& x);
Var add_scalar(const Var& x, double c);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& x, const Shape& shape);
Var sum_to(const Var& x, const Shape& shape);
Var broadcast_to(const Var& x, const Shape& shape);
/// Sum of all elements, shape [1].
Var sum(const Var& x);
/// Mean of all elements, shape [1].
Var mean(const Var& x);

Var exp(const Var& x);
Var log(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
/// Derivative at exactly 0 is 0.
Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var elu(const Var& x, double alpha);
Var abs(const Var& x);
Var sqrt(const Var& x);
Var square(const Var& x);
/// Gradient passes only where lo < x < hi.
Var clamp(const Var& x, double lo, double hi);

/// Cross-correlation, x [N,C,H,W], kernel [F,C,kh,kw].
Var conv2d(const Var& x, const Var& kernel, kernels::Conv2dGeometry g);
/// Transposed convolution, x [N,Cin,H,W], kernel [Cin,Cout,kh,kw], output
/// extent stride*(H-1)+kh-2*padding.
Var conv_transpose2d(const Var& x, const Var& kernel, kernels::Conv2dGeometry g);
Var conv_input_adjoint(const Var& grad, const Var& kernel, kernels::Conv2dGeometry g,
                       std::size_t height, std::size_t width);
Var conv_kernel_adjoint(const Var& x, const Var& grad, kernels::Conv2dGeometry g,
                        std::size_t kh, std::size_t kw);

Var pool_sum(const Var& x, std::size_t window, kernels::Conv2dGeometry g);
Var pool_sum_adjoint(const Var& grad, std::size_t window, kernels::Conv2dGeometry g,
                     std::size_t height, std::size_t width);
Var avg_pool2d(const Var& x, std::size_t window, kernels::Conv2dGeometry g);
Var max_pool2d(const Var& x, std::size_t window, kernels::Conv2dGeometry g);
/// Nearest-neighbour upsampling by an integer factor.
Var upsample_nearest(const Var& x, std::size_t factor);

/// out.flat[i] = x.flat[index[i]].
Var gather(const Var& x, std::shared_ptr<const std::vector<std::size_t>> index,
           const Shape& out_shape);
/// out.flat[index[i]] += g.flat[i]; adjoint of gather.
Var scatter(const Var& g, std::shared_ptr<const std::vector<std::size_t>> index,
            const Shape& out_shape);

/// Concatenation along axis 1; all other extents must agree.
Var concat(const Var& a, const Var& b);
/// Slice [offset, offset+length) of axis 1.
Var narrow(const Var& x, std::size_t offset, std::size_t length);
/// Embeds x as the axis-1 slice starting at `offset` of a zero tensor of
/// `shape`; adjoint of narrow.
Var pad_narrow(const Var& x, const Shape& shape, std::size_t offset);

/// Accumulates d(loss)/d(leaf) into every reachable leaf that requires grad.
/// Nodes used several times receive the sum of their adjoints. With
/// create_graph the gradient computation itself is recorded.
void backward(const Var& loss, bool create_graph = false);

/// Gradients of a scalar output with respect to `wrt` (any nodes), without
/// touching stored leaf gradients. Unreached entries are zero tensors.
std::vector<Var> grad(const Var& output, const std::vector<Var>& wrt,
                      bool create_graph = false);

/// Maximum over all elements of |autodiff - central difference| /
/// max(1, |central difference|). f is re-evaluated with each element of each
/// parameter perturbed by +-eps; parameters are restored afterwards. Throws
/// ContractError if f produces a non-finite value. Inputs must sit at least eps
/// away from kinks (ReLU at 0, clamp boundaries) for the result to mean
/// anything.
double grad_check(const std::function<Var()>& f, const std::vector<Var>& params,
                  double eps = 1e-5);
double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x,
                  double eps = 1e-5);

}  // namespace authorgan
