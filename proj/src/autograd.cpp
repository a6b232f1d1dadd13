#include "authorgan/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "authorgan/error.hpp"

namespace authorgan {

namespace {

thread_local bool g_grad_enabled = true;

using kernels::Conv2dGeometry;

Var record(OpKind op, Tensor value, std::vector<Var> inputs, Node::BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->value = std::move(value);
  const bool needs =
      g_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(fn);
  }
  return Var(std::move(node));
}

Tensor map_unary(const Tensor& x, double (*fn)(double)) {
  Tensor out(x.shape());
  auto o = out.data();
  auto in = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(in[i]);
  return out;
}

template <typename Fn>
Tensor map_with(const Tensor& x, Fn fn) {
  Tensor out(x.shape());
  auto o = out.data();
  auto in = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(in[i]);
  return out;
}

std::size_t inner_extent(const Shape& s) {
  std::size_t inner = 1;
  for (std::size_t i = 2; i < s.size(); ++i) inner *= s[i];
  return inner;
}

void require_axis1(const Shape& s, const char* what) {
  if (s.size() < 2) {
    throw ShapeError(std::string(what) + " needs rank >= 2, got " + to_string(s));
  }
}

Tensor concat_values(const Tensor& a, const Tensor& b) {
  require_axis1(a.shape(), "concat");
  require_axis1(b.shape(), "concat");
  Shape sa = a.shape(), sb = b.shape();
  Shape rest_a(sa.begin() + 2, sa.end()), rest_b(sb.begin() + 2, sb.end());
  if (sa[0] != sb[0] || rest_a != rest_b) {
    throw ShapeError("concat requires equal extents off axis 1: " + to_string(sa) + " vs " +
                     to_string(sb));
  }
  Shape out_shape = sa;
  out_shape[1] = sa[1] + sb[1];
  const std::size_t inner = inner_extent(sa);
  const std::size_t ra = sa[1] * inner, rb = sb[1] * inner;
  Tensor out(out_shape);
  auto o = out.data();
  for (std::size_t n = 0; n < sa[0]; ++n) {
    std::copy_n(a.data().begin() + n * ra, ra, o.begin() + n * (ra + rb));
    std::copy_n(b.data().begin() + n * rb, rb, o.begin() + n * (ra + rb) + ra);
  }
  return out;
}

Tensor narrow_values(const Tensor& x, std::size_t offset, std::size_t length) {
  require_axis1(x.shape(), "narrow");
  if (length == 0 || offset + length > x.dim(1)) {
    throw ShapeError("narrow [" + std::to_string(offset) + "," + std::to_string(offset + length) +
                     ") out of range for " + to_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[1] = length;
  const std::size_t inner = inner_extent(x.shape());
  const std::size_t row = x.dim(1) * inner, take = length * inner;
  Tensor out(out_shape);
  for (std::size_t n = 0; n < x.dim(0); ++n) {
    std::copy_n(x.data().begin() + n * row + offset * inner, take,
                out.data().begin() + n * take);
  }
  return out;
}

Tensor pad_narrow_values(const Tensor& x, const Shape& shape, std::size_t offset) {
  require_axis1(shape, "pad_narrow");
  Shape expect = shape;
  if (offset + x.dim(1) > shape[1]) {
    throw ShapeError("pad_narrow slice exceeds target " + to_string(shape));
  }
  expect[1] = x.dim(1);
  if (expect != x.shape()) {
    throw ShapeError("pad_narrow source " + to_string(x.shape()) + " incompatible with " +
                     to_string(shape));
  }
  const std::size_t inner = inner_extent(shape);
  const std::size_t row = shape[1] * inner, take = x.dim(1) * inner;
  Tensor out(shape);
  for (std::size_t n = 0; n < shape[0]; ++n) {
    std::copy_n(x.data().begin() + n * take, take,
                out.data().begin() + n * row + offset * inner);
  }
  return out;
}

// Depth-first post-order over nodes that require grad: inputs before users.
std::vector<Var> topo_order(const Var& root) {
  std::vector<Var> order;
  std::unordered_set<const Node*> visited;
  std::vector<std::pair<Var, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [v, next] = stack.back();
    const auto& ins = v.inputs();
    if (next < ins.size()) {
      const Var child = ins[next++];
      if (child.requires_grad() && visited.insert(child.node()).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(v);
    stack.pop_back();
  }
  return order;
}

void accumulate(std::unordered_map<const Node*, Var>& grads, const Var& target, const Var& g) {
  auto [it, inserted] = grads.try_emplace(target.node(), g);
  if (!inserted) it->second = add(it->second, g);
}

// Shared reverse sweep. Leaves get their stored grad updated when
// `store_leaf_grads`; otherwise adjoints are only returned for `keep`.
std::unordered_map<const Node*, Var> run_backward(const Var& root, bool create_graph,
                                                  bool store_leaf_grads,
                                                  const std::unordered_set<const Node*>& keep) {
  std::unordered_map<const Node*, Var> grads;
  if (!root.requires_grad()) return grads;
  if (root.value().size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + to_string(root.shape()));
  }
  GradModeGuard mode(create_graph);
  const std::vector<Var> order = topo_order(root);
  grads.emplace(root.node(), constant(Tensor(root.shape(), 1.0)));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Var& v = *it;
    auto found = grads.find(v.node());
    if (found == grads.end()) continue;
    Var g = found->second;
    Node& node = *v.node();
    if (!node.backward) {
      if (store_leaf_grads) {
        if (node.grad) {
          node.grad = kernels::binary(kernels::BinaryKind::add, *node.grad, g.value());
        } else if (!create_graph && !keep.contains(v.node())) {
          grads.erase(found);
          // steal the buffer when nothing else can see it
          if (g.use_count() == 1) {
            node.grad = std::move(g.mutable_value());
          } else {
            node.grad = g.value();
          }
          continue;
        } else {
          node.grad = g.value();
        }
      }
    } else {
      const std::vector<Var> in_grads = node.backward(v, g);
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        if (i < in_grads.size() && in_grads[i].defined() && node.inputs[i].requires_grad()) {
          accumulate(grads, node.inputs[i], in_grads[i]);
        }
      }
    }
    if (!keep.contains(v.node())) grads.erase(v.node());
  }
  return grads;
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::div: return "div";
    case OpKind::scale: return "scale";
    case OpKind::matmul: return "matmul";
    case OpKind::transpose: return "transpose";
    case OpKind::reshape: return "reshape";
    case OpKind::sum_to: return "sum_to";
    case OpKind::broadcast_to: return "broadcast_to";
    case OpKind::exp: return "exp";
    case OpKind::log: return "log";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::relu: return "relu";
    case OpKind::leaky_relu: return "leaky_relu";
    case OpKind::elu: return "elu";
    case OpKind::abs: return "abs";
    case OpKind::sqrt: return "sqrt";
    case OpKind::square: return "square";
    case OpKind::clamp: return "clamp";
    case OpKind::conv2d: return "conv2d";
    case OpKind::conv_input_adjoint: return "conv_input_adjoint";
    case OpKind::conv_kernel_adjoint: return "conv_kernel_adjoint";
    case OpKind::pool_sum: return "pool_sum";
    case OpKind::pool_sum_adjoint: return "pool_sum_adjoint";
    case OpKind::gather: return "gather";
    case OpKind::scatter: return "scatter";
    case OpKind::concat: return "concat";
    case OpKind::narrow: return "narrow";
    case OpKind::pad_narrow: return "pad_narrow";
  }
  return "unknown";
}

Tensor Var::grad_or_zero() const {
  return node_->grad ? *node_->grad : Tensor(node_->value.shape());
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

bool grad_enabled() noexcept { return g_grad_enabled; }

GradModeGuard::GradModeGuard(bool enabled) : previous_(g_grad_enabled) {
  g_grad_enabled = enabled;
}

GradModeGuard::~GradModeGuard() { g_grad_enabled = previous_; }

// --- elementwise ----------------------------------------------------------

Var add(const Var& a, const Var& b) {
  return record(OpKind::add, kernels::binary(kernels::BinaryKind::add, a.value(), b.value()),
                {a, b}, [](const Var& self, const Var& g) {
                  const auto& in = self.inputs();
                  return std::vector<Var>{
                      in[0].requires_grad() ? sum_to(g, in[0].shape()) : Var(),
                      in[1].requires_grad() ? sum_to(g, in[1].shape()) : Var()};
                });
}

Var sub(const Var& a, const Var& b) {
  return record(OpKind::sub, kernels::binary(kernels::BinaryKind::sub, a.value(), b.value()),
                {a, b}, [](const Var& self, const Var& g) {
                  const auto& in = self.inputs();
                  return std::vector<Var>{
                      in[0].requires_grad() ? sum_to(g, in[0].shape()) : Var(),
                      in[1].requires_grad() ? neg(sum_to(g, in[1].shape())) : Var()};
                });
}

Var mul(const Var& a, const Var& b) {
  return record(OpKind::mul, kernels::binary(kernels::BinaryKind::mul, a.value(), b.value()),
                {a, b}, [](const Var& self, const Var& g) {
                  const auto& in = self.inputs();
                  return std::vector<Var>{
                      in[0].requires_grad() ? sum_to(mul(g, in[1]), in[0].shape()) : Var(),
                      in[1].requires_grad() ? sum_to(mul(g, in[0]), in[1].shape()) : Var()};
                });
}

Var div(const Var& a, const Var& b) {
  return record(OpKind::div, kernels::binary(kernels::BinaryKind::div, a.value(), b.value()),
                {a, b}, [](const Var& self, const Var& g) {
                  const auto& in = self.inputs();
                  return std::vector<Var>{
                      in[0].requires_grad() ? sum_to(div(g, in[1]), in[0].shape()) : Var(),
                      in[1].requires_grad()
                          ? sum_to(neg(div(mul(g, self), in[1])), in[1].shape())
                          : Var()};
                });
}

Var scale(const Var& x, double factor) {
  Tensor out = map_with(x.value(), [factor](double v) { return v * factor; });
  return record(OpKind::scale, std::move(out), {x}, [factor](const Var&, const Var& g) {
    return std::vector<Var>{scale(g, factor)};
  });
}

Var neg(const Var& x) { return scale(x, -1.0); }

Var add_scalar(const Var& x, double c) {
  Tensor out = map_with(x.value(), [c](double v) { return v + c; });
  return record(OpKind::add, std::move(out), {x},
                [](const Var&, const Var& g) { return std::vector<Var>{g}; });
}

// --- linear algebra and shape ----------------------------------------------

namespace {

// C = op(A) op(B) with op = identity or transpose. Gradients reuse the same
// product with adjusted flags, so no transposed copies are materialized.
Var matmul_flags(const Var& a, const Var& b, bool ta, bool tb) {
  return record(OpKind::matmul, kernels::matmul(a.value(), b.value(), ta, tb), {a, b},
                [ta, tb](const Var& self, const Var& g) {
                  const auto& in = self.inputs();
                  const Var& A = in[0];
                  const Var& B = in[1];
                  Var da, db;
                  if (A.requires_grad()) {
                    da = !ta ? matmul_flags(g, B, false, !tb) : matmul_flags(B, g, tb, true);
                  }
                  if (B.requires_grad()) {
                    db = !tb ? matmul_flags(A, g, !ta, false) : matmul_flags(g, A, true, ta);
                  }
                  return std::vector<Var>{da, db};
                });
}

}  // namespace

Var matmul(const Var& a, const Var& b) { return matmul_flags(a, b, false, false); }

Var transpose(const Var& a) {
  return record(OpKind::transpose, kernels::transpose2d(a.value()), {a},
                [](const Var&, const Var& g) { return std::vector<Var>{transpose(g)}; });
}

Var reshape(const Var& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  const Shape original = x.shape();
  return record(OpKind::reshape, x.value().reshaped(shape), {x},
                [original](const Var&, const Var& g) {
                  return std::vector<Var>{reshape(g, original)};
                });
}

Var sum_to(const Var& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  const Shape original = x.shape();
  return record(OpKind::sum_to, kernels::sum_to(x.value(), shape), {x},
                [original](const Var&, const Var& g) {
                  return std::vector<Var>{broadcast_to(g, original)};
                });
}

Var broadcast_to(const Var& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  const Shape original = x.shape();
  return record(OpKind::broadcast_to, kernels::broadcast_to(x.value(), shape), {x},
                [original](const Var&, const Var& g) {
                  return std::vector<Var>{sum_to(g, original)};
                });
}

Var sum(const Var& x) { return reshape(sum_to(x, Shape(x.shape().size(), 1)), Shape{1}); }

Var mean(const Var& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

// --- pointwise nonlinearities ------------------------------------------------

Var exp(const Var& x) {
  return record(OpKind::exp, map_unary(x.value(), [](double v) { return std::exp(v); }), {x},
                [](const Var& self, const Var& g) { return std::vector<Var>{mul(g, self)}; });
}

Var log(const Var& x) {
  return record(OpKind::log, map_unary(x.value(), [](double v) { return std::log(v); }), {x},
                [](const Var& self, const Var& g) {
                  return std::vector<Var>{div(g, self.inputs()[0])};
                });
}

Var tanh(const Var& x) {
  return record(OpKind::tanh, map_unary(x.value(), [](double v) { return std::tanh(v); }), {x},
                [](const Var& self, const Var& g) {
                  return std::vector<Var>{mul(g, add_scalar(neg(square(self)), 1.0))};
                });
}

Var sigmoid(const Var& x) {
  Tensor out = map_unary(x.value(), [](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  return record(OpKind::sigmoid, std::move(out), {x}, [](const Var& self, const Var& g) {
    return std::vector<Var>{mul(g, mul(self, add_scalar(neg(self), 1.0)))};
  });
}

Var relu(const Var& x) {
  return record(OpKind::relu, map_unary(x.value(), [](double v) { return v > 0 ? v : 0.0; }),
                {x}, [](const Var& self, const Var& g) {
                  Tensor mask = map_unary(self.inputs()[0].value(),
                                          [](double v) { return v > 0 ? 1.0 : 0.0; });
                  return std::vector<Var>{mul(g, constant(std::move(mask)))};
                });
}

Var leaky_relu(const Var& x, double slope) {
  return record(OpKind::leaky_relu,
                map_with(x.value(), [slope](double v) { return v > 0 ? v : slope * v; }), {x},
                [slope](const Var& self, const Var& g) {
                  Tensor mask = map_with(self.inputs()[0].value(),
                                         [slope](double v) { return v > 0 ? 1.0 : slope; });
                  return std::vector<Var>{mul(g, constant(std::move(mask)))};
                });
}

Var elu(const Var& x, double alpha) {
  return record(OpKind::elu,
                map_with(x.value(),
                         [alpha](double v) { return v > 0 ? v : alpha * std::expm1(v); }),
                {x}, [alpha](const Var& self, const Var& g) {
                  const Tensor& in = self.inputs()[0].value();
                  Tensor pos = map_unary(in, [](double v) { return v > 0 ? 1.0 : 0.0; });
                  Tensor negm = map_unary(in, [](double v) { return v > 0 ? 0.0 : 1.0; });
                  // d/dx = 1 for x > 0, else y + alpha
                  Var slope = add(constant(std::move(pos)),
                                  mul(constant(std::move(negm)), add_scalar(self, alpha)));
                  return std::vector<Var>{mul(g, slope)};
                });
}

Var abs(const Var& x) {
  return record(OpKind::abs, map_unary(x.value(), [](double v) { return std::fabs(v); }), {x},
                [](const Var& self, const Var& g) {
                  Tensor sign = map_unary(self.inputs()[0].value(), [](double v) {
                    return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
                  });
                  return std::vector<Var>{mul(g, constant(std::move(sign)))};
                });
}

Var sqrt(const Var& x) {
  return record(OpKind::sqrt, map_unary(x.value(), [](double v) { return std::sqrt(v); }), {x},
                [](const Var& self, const Var& g) {
                  return std::vector<Var>{div(g, scale(self, 2.0))};
                });
}

Var square(const Var& x) {
  return record(OpKind::square, map_unary(x.value(), [](double v) { return v * v; }), {x},
                [](const Var& self, const Var& g) {
                  return std::vector<Var>{mul(g, scale(self.inputs()[0], 2.0))};
                });
}

Var clamp(const Var& x, double lo, double hi) {
  return record(OpKind::clamp, map_with(x.value(), [lo, hi](double v) {
                  return std::clamp(v, lo, hi);
                }),
                {x}, [lo, hi](const Var& self, const Var& g) {
                  Tensor mask = map_with(self.inputs()[0].value(), [lo, hi](double v) {
                    return (v > lo && v < hi) ? 1.0 : 0.0;
                  });
                  return std::vector<Var>{mul(g, constant(std::move(mask)))};
                });
}

// --- convolution family ------------------------------------------------------
// conv2d, its input adjoint and its kernel adjoint are mutually adjoint, so each
// one's gradient rule is written with the other two.

Var conv2d(const Var& x, const Var& kernel, Conv2dGeometry geo) {
  return record(OpKind::conv2d, kernels::conv2d(x.value(), kernel.value(), geo), {x, kernel},
                [geo](const Var& self, const Var& g) {
                  const auto& in = self.inputs();
                  const Shape& xs = in[0].shape();
                  const Shape& ks = in[1].shape();
                  return std::vector<Var>{
                      in[0].requires_grad() ? conv_input_adjoint(g, in[1], geo, xs[2], xs[3])
                                            : Var(),
                      in[1].requires_grad() ? conv_kernel_adjoint(in[0], g, geo, ks[2], ks[3])
                                            : Var()};
                });
}

Var conv_input_adjoint(const Var& grad, const Var& kernel, Conv2dGeometry geo,
                       std::size_t height, std::size_t width) {
  return record(OpKind::conv_input_adjoint,
                kernels::conv2d_input_adjoint(grad.value(), kernel.value(), geo, height, width),
                {grad, kernel}, [geo](const Var& self, const Var& g) {
                  const auto& in = self.inputs();
                  const Shape& ks = in[1].shape();
                  return std::vector<Var>{
                      in[0].requires_grad() ? conv2d(g, in[1], geo) : Var(),
                      in[1].requires_grad() ? conv_kernel_adjoint(g, in[0], geo, ks[2], ks[3])
                                            : Var()};
                });
}

Var conv_kernel_adjoint(const Var& x, const Var& grad, Conv2dGeometry geo, std::size_t kh,
                        std::size_t kw) {
  return record(OpKind::conv_kernel_adjoint,
                kernels::conv2d_kernel_adjoint(x.value(), grad.value(), geo, kh, kw), {x, grad},
                [geo](const Var& self, const Var& g) {
                  const auto& in = self.inputs();
                  const Shape& xs = in[0].shape();
                  return std::vector<Var>{
                      in[0].requires_grad() ? conv_input_adjoint(in[1], g, geo, xs[2], xs[3])
                                            : Var(),
                      in[1].requires_grad() ? conv2d(in[0], g, geo) : Var()};
                });
}

Var conv_transpose2d(const Var& x, const Var& kernel, Conv2dGeometry geo) {
  if (x.value().rank() != 4 || kernel.value().rank() != 4) {
    throw ShapeError("transposed convolution expects rank-4 input and kernel, got " +
                     to_string(x.shape()) + " and " + to_string(kernel.shape()));
  }
  const std::size_t h =
      kernels::conv_transpose_out_extent(x.shape()[2], kernel.shape()[2], geo.stride, geo.padding);
  const std::size_t w =
      kernels::conv_transpose_out_extent(x.shape()[3], kernel.shape()[3], geo.stride, geo.padding);
  return conv_input_adjoint(x, kernel, geo, h, w);
}

Var pool_sum(const Var& x, std::size_t window, Conv2dGeometry geo) {
  return record(OpKind::pool_sum, kernels::pool_sum(x.value(), window, geo), {x},
                [window, geo](const Var& self, const Var& g) {
                  const Shape& xs = self.inputs()[0].shape();
                  return std::vector<Var>{pool_sum_adjoint(g, window, geo, xs[2], xs[3])};
                });
}

Var pool_sum_adjoint(const Var& grad, std::size_t window, Conv2dGeometry geo,
                     std::size_t height, std::size_t width) {
  return record(OpKind::pool_sum_adjoint,
                kernels::pool_sum_adjoint(grad.value(), window, geo, height, width), {grad},
                [window, geo](const Var&, const Var& g) {
                  return std::vector<Var>{pool_sum(g, window, geo)};
                });
}

Var avg_pool2d(const Var& x, std::size_t window, Conv2dGeometry geo) {
  return scale(pool_sum(x, window, geo), 1.0 / static_cast<double>(window * window));
}

Var max_pool2d(const Var& x, std::size_t window, Conv2dGeometry geo) {
  auto index = std::make_shared<std::vector<std::size_t>>();
  Tensor pooled = kernels::max_pool(x.value(), window, geo, *index);
  return gather(x, std::move(index), pooled.shape());
}

Var upsample_nearest(const Var& x, std::size_t factor) {
  if (x.value().rank() != 4) {
    throw ShapeError("upsampling expects [N,C,H,W], got " + to_string(x.shape()));
  }
  if (factor == 0) throw ShapeError("upsampling factor must be >= 1");
  return pool_sum_adjoint(x, factor, Conv2dGeometry{factor, 0}, x.shape()[2] * factor,
                          x.shape()[3] * factor);
}

Var gather(const Var& x, std::shared_ptr<const std::vector<std::size_t>> index,
           const Shape& out_shape) {
  if (index->size() != numel(out_shape)) {
    throw ShapeError("gather index count does not match " + to_string(out_shape));
  }
  Tensor out(out_shape);
  auto in = x.value().data();
  for (std::size_t i = 0; i < index->size(); ++i) {
    const std::size_t at = (*index)[i];
    if (at >= in.size()) throw ShapeError("gather index out of range");
    out[i] = in[at];
  }
  return record(OpKind::gather, std::move(out), {x}, [index](const Var& self, const Var& g) {
    return std::vector<Var>{scatter(g, index, self.inputs()[0].shape())};
  });
}

Var scatter(const Var& g, std::shared_ptr<const std::vector<std::size_t>> index,
            const Shape& out_shape) {
  if (index->size() != g.value().size()) {
    throw ShapeError("scatter index count does not match " + to_string(g.shape()));
  }
  Tensor out(out_shape);
  auto src = g.value().data();
  for (std::size_t i = 0; i < index->size(); ++i) {
    const std::size_t at = (*index)[i];
    if (at >= out.size()) throw ShapeError("scatter index out of range");
    out[at] += src[i];
  }
  return record(OpKind::scatter, std::move(out), {g}, [index](const Var& self, const Var& gz) {
    return std::vector<Var>{gather(gz, index, self.inputs()[0].shape())};
  });
}

Var concat(const Var& a, const Var& b) {
  return record(OpKind::concat, concat_values(a.value(), b.value()), {a, b},
                [](const Var& self, const Var& g) {
                  const auto& in = self.inputs();
                  const std::size_t ca = in[0].shape()[1], cb = in[1].shape()[1];
                  return std::vector<Var>{in[0].requires_grad() ? narrow(g, 0, ca) : Var(),
                                          in[1].requires_grad() ? narrow(g, ca, cb) : Var()};
                });
}

Var narrow(const Var& x, std::size_t offset, std::size_t length) {
  return record(OpKind::narrow, narrow_values(x.value(), offset, length), {x},
                [offset](const Var& self, const Var& g) {
                  return std::vector<Var>{pad_narrow(g, self.inputs()[0].shape(), offset)};
                });
}

Var pad_narrow(const Var& x, const Shape& shape, std::size_t offset) {
  return record(OpKind::pad_narrow, pad_narrow_values(x.value(), shape, offset), {x},
                [offset](const Var& self, const Var& g) {
                  return std::vector<Var>{narrow(g, offset, self.inputs()[0].shape()[1])};
                });
}

// --- gradients -----------------------------------------------------------------

void backward(const Var& loss, bool create_graph) {
  run_backward(loss, create_graph, true, {});
}

std::vector<Var> grad(const Var& output, const std::vector<Var>& wrt, bool create_graph) {
  std::unordered_set<const Node*> keep;
  for (const auto& w : wrt) keep.insert(w.node());
  auto grads = run_backward(output, create_graph, false, keep);
  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    auto it = grads.find(w.node());
    out.push_back(it != grads.end() ? it->second : constant(Tensor(w.shape())));
  }
  return out;
}

double grad_check(const std::function<Var()>& f, const std::vector<Var>& params, double eps) {
  auto evaluate = [&f]() {
    NoGrad off;
    const Var y = f();
    if (y.value().size() != 1) {
      throw ContractError("grad_check needs a scalar function, got shape " +
                          to_string(y.shape()));
    }
    const double v = y.value()[0];
    if (!std::isfinite(v)) throw ContractError("grad_check: function value is not finite");
    return v;
  };

  for (auto p : params) p.zero_grad();
  Var y;
  {
    GradModeGuard on(true);
    y = f();
  }
  if (y.value().size() != 1) {
    throw ContractError("grad_check needs a scalar function, got shape " + to_string(y.shape()));
  }
  if (!std::isfinite(y.value()[0])) {
    throw ContractError("grad_check: function value is not finite");
  }
  backward(y);

  double worst = 0.0;
  for (auto p : params) {
    const Tensor analytic = p.grad_or_zero();
    Tensor& value = p.mutable_value();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double original = value[i];
      value[i] = original + eps;
      const double up = evaluate();
      value[i] = original - eps;
      const double down = evaluate();
      value[i] = original;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = std::fabs(analytic[i] - numeric) / std::max(1.0, std::fabs(numeric));
      worst = std::max(worst, err);
    }
    p.zero_grad();
  }
  return worst;
}

double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double eps) {
  Var input = parameter(x);
  return grad_check([&]() { return f(input); }, {input}, eps);
}

}  // namespace authorgan
