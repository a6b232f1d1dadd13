#include "authorgan/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "authorgan/error.hpp"

namespace authorgan {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (ea != eb && ea != 1 && eb != 1) {
      throw ShapeError("shapes " + to_string(a) + " and " + to_string(b) +
                       " are not broadcast-compatible");
    }
    out[i] = std::max(ea, eb);
  }
  return out;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extent must be >= 1, got " + to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != numel(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape_));
  }
}

Tensor Tensor::from(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::randn(const Shape& shape, RngStream& rng) {
  Tensor t(shape);
  for (auto& v : t.data_) v = rng.normal();
  return t;
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ContractError("item() on tensor of shape " + to_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

namespace kernels {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstView = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using View = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

// Row-major C (m x n) = op(A) op(B) + (accumulate ? C : 0); ld* are row strides.
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, bool accumulate, double* c,
          std::size_t ldc) {
  const auto M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n),
             K = static_cast<Eigen::Index>(k);
  ConstView A(a, ta ? K : M, ta ? M : K, Eigen::OuterStride<>(static_cast<Eigen::Index>(lda)));
  ConstView B(b, tb ? N : K, tb ? K : N, Eigen::OuterStride<>(static_cast<Eigen::Index>(ldb)));
  View C(c, M, N, Eigen::OuterStride<>(static_cast<Eigen::Index>(ldc)));
  if (!accumulate) C.setZero();
  if (ta && tb) C.noalias() += A.transpose() * B.transpose();
  else if (ta) C.noalias() += A.transpose() * B;
  else if (tb) C.noalias() += A * B.transpose();
  else C.noalias() += A * B;
}


// Strides of `shape` viewed inside a broadcast result of rank `rank`; broadcast
// axes get stride 0.
std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& out) {
  const std::size_t rank = out.size();
  std::vector<std::size_t> strides(rank, 0);
  std::size_t stride = 1;
  for (std::size_t i = shape.size(); i-- > 0;) {
    const std::size_t axis = i + (rank - shape.size());
    strides[axis] = shape[i] == 1 ? 0 : stride;
    stride *= shape[i];
  }
  return strides;
}

// Calls fn(out_index, a_index, b_index) over every element of `out`.
template <typename Fn>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, Fn&& fn) {
  const std::size_t rank = out.size();
  const std::size_t total = numel(out);
  const std::size_t inner = out.back();
  const std::size_t ia = sa.back();
  const std::size_t ib = sb.back();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t pa = 0, pb = 0;
  for (std::size_t o = 0; o < total; o += inner) {
    for (std::size_t j = 0; j < inner; ++j) fn(o + j, pa + j * ia, pb + j * ib);
    // advance the multi-index over the outer axes
    for (std::size_t axis = rank - 1; axis-- > 0;) {
      ++idx[axis];
      pa += sa[axis];
      pb += sb[axis];
      if (idx[axis] < out[axis]) break;
      pa -= sa[axis] * idx[axis];
      pb -= sb[axis] * idx[axis];
      idx[axis] = 0;
    }
  }
}

template <typename Op>
Tensor apply_binary(const Tensor& a, const Tensor& b, Op op) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    auto o = out.data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = op(x[i], y[i]);
    return out;
  }
  const Shape shape = broadcast_shapes(a.shape(), b.shape());
  Tensor out(shape);
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for_each_broadcast(shape, broadcast_strides(a.shape(), shape),
                     broadcast_strides(b.shape(), shape),
                     [&](std::size_t io, std::size_t ia, std::size_t ib) {
                       o[io] = op(x[ia], y[ib]);
                     });
  return out;
}

}  // namespace

Tensor binary(BinaryKind kind, const Tensor& a, const Tensor& b) {
  switch (kind) {
    case BinaryKind::add:
      return apply_binary(a, b, [](double x, double y) { return x + y; });
    case BinaryKind::sub:
      return apply_binary(a, b, [](double x, double y) { return x - y; });
    case BinaryKind::mul:
      return apply_binary(a, b, [](double x, double y) { return x * y; });
    case BinaryKind::div:
      return apply_binary(a, b, [](double x, double y) { return x / y; });
  }
  throw ContractError("unknown binary kind");
}

Tensor sum_to(const Tensor& x, const Shape& target) {
  if (x.shape() == target) return x;
  if (broadcast_shapes(target, x.shape()) != x.shape()) {
    throw ShapeError("cannot sum " + to_string(x.shape()) + " down to " +
                     to_string(target));
  }
  Tensor out(target);
  auto o = out.data();
  auto in = x.data();
  const auto st = broadcast_strides(target, x.shape());
  const std::vector<std::size_t> unit(x.rank(), 0);
  for_each_broadcast(x.shape(), st, unit,
                     [&](std::size_t ix, std::size_t it, std::size_t) { o[it] += in[ix]; });
  return out;
}

Tensor broadcast_to(const Tensor& x, const Shape& target) {
  if (x.shape() == target) return x;
  if (broadcast_shapes(x.shape(), target) != target) {
    throw ShapeError("cannot broadcast " + to_string(x.shape()) + " to " +
                     to_string(target));
  }
  Tensor out(target);
  auto o = out.data();
  auto in = x.data();
  const std::vector<std::size_t> unit(target.size(), 0);
  for_each_broadcast(target, broadcast_strides(x.shape(), target), unit,
                     [&](std::size_t io, std::size_t ix, std::size_t) { o[io] = in[ix]; });
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul expects rank-2 operands, got " + to_string(a.shape()) +
                     " and " + to_string(b.shape()));
  }
  const std::size_t m = transpose_a ? a.dim(1) : a.dim(0);
  const std::size_t k = transpose_a ? a.dim(0) : a.dim(1);
  const std::size_t kb = transpose_b ? b.dim(1) : b.dim(0);
  const std::size_t n = transpose_b ? b.dim(0) : b.dim(1);
  if (k != kb) {
    throw ShapeError("matmul inner dimensions differ: " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  Tensor c(Shape{m, n});
  gemm(transpose_a, transpose_b, m, n, k, a.data().data(), a.dim(1), b.data().data(), b.dim(1),
       false, c.data().data(), n);
  return c;
}

Tensor transpose2d(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose expects rank 2, got " + to_string(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1);
  Tensor out(Shape{c, r});
  auto o = out.data();
  auto in = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) o[j * r + i] = in[i * c + j];
  return out;
}

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                            std::size_t padding) {
  if (stride == 0) throw ShapeError("stride must be >= 1");
  const long long span = static_cast<long long>(in) + 2LL * static_cast<long long>(padding) -
                         static_cast<long long>(kernel);
  if (span < 0) {
    throw ShapeError("kernel " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(in + 2 * padding));
  }
  return static_cast<std::size_t>(span) / stride + 1;
}

std::size_t conv_transpose_out_extent(std::size_t in, std::size_t kernel,
                                      std::size_t stride, std::size_t padding) {
  if (stride == 0) throw ShapeError("stride must be >= 1");
  const long long out = static_cast<long long>(stride) * (static_cast<long long>(in) - 1) +
                        static_cast<long long>(kernel) - 2LL * static_cast<long long>(padding);
  if (out < 1) {
    throw ShapeError("transposed convolution produces extent " + std::to_string(out));
  }
  return static_cast<std::size_t>(out);
}

namespace {

struct ConvDims {
  std::size_t c, h, w, kh, kw, ho, wo;
};

// One sample [C,H,W] -> columns [C*kh*kw, Ho*Wo].
void im2col(const double* x, const ConvDims& d, Conv2dGeometry g, double* cols) {
  const long pad = static_cast<long>(g.padding);
  for (std::size_t c = 0; c < d.c; ++c)
    for (std::size_t i = 0; i < d.kh; ++i)
      for (std::size_t j = 0; j < d.kw; ++j) {
        double* row = cols + ((c * d.kh + i) * d.kw + j) * d.ho * d.wo;
        for (std::size_t oy = 0; oy < d.ho; ++oy) {
          const long y = static_cast<long>(oy * g.stride + i) - pad;
          for (std::size_t ox = 0; ox < d.wo; ++ox) {
            const long xx = static_cast<long>(ox * g.stride + j) - pad;
            row[oy * d.wo + ox] =
                (y < 0 || xx < 0 || y >= static_cast<long>(d.h) || xx >= static_cast<long>(d.w))
                    ? 0.0
                    : x[(c * d.h + static_cast<std::size_t>(y)) * d.w +
                        static_cast<std::size_t>(xx)];
          }
        }
      }
}

void col2im(const double* cols, const ConvDims& d, Conv2dGeometry g, double* x) {
  const long pad = static_cast<long>(g.padding);
  for (std::size_t c = 0; c < d.c; ++c)
    for (std::size_t i = 0; i < d.kh; ++i)
      for (std::size_t j = 0; j < d.kw; ++j) {
        const double* row = cols + ((c * d.kh + i) * d.kw + j) * d.ho * d.wo;
        for (std::size_t oy = 0; oy < d.ho; ++oy) {
          const long y = static_cast<long>(oy * g.stride + i) - pad;
          if (y < 0 || y >= static_cast<long>(d.h)) continue;
          for (std::size_t ox = 0; ox < d.wo; ++ox) {
            const long xx = static_cast<long>(ox * g.stride + j) - pad;
            if (xx < 0 || xx >= static_cast<long>(d.w)) continue;
            x[(c * d.h + static_cast<std::size_t>(y)) * d.w + static_cast<std::size_t>(xx)] +=
                row[oy * d.wo + ox];
          }
        }
      }
}

void require_rank4(const Tensor& t, const char* what) {
  if (t.rank() != 4) {
    throw ShapeError(std::string(what) + " must be rank 4 [N,C,H,W], got " +
                     to_string(t.shape()));
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, Conv2dGeometry g) {
  require_rank4(input, "conv2d input");
  require_rank4(kernel, "conv2d kernel");
  if (input.dim(1) != kernel.dim(1)) {
    throw ShapeError("conv2d channel mismatch: input " + to_string(input.shape()) +
                     ", kernel " + to_string(kernel.shape()));
  }
  const std::size_t n = input.dim(0), f = kernel.dim(0);
  ConvDims d{input.dim(1), input.dim(2), input.dim(3), kernel.dim(2), kernel.dim(3), 0, 0};
  d.ho = conv_out_extent(d.h, d.kh, g.stride, g.padding);
  d.wo = conv_out_extent(d.w, d.kw, g.stride, g.padding);
  const std::size_t ckk = d.c * d.kh * d.kw, hw = d.ho * d.wo;
  Tensor out(Shape{n, f, d.ho, d.wo});
  std::vector<double> cols(ckk * hw);
  for (std::size_t s = 0; s < n; ++s) {
    im2col(input.data().data() + s * d.c * d.h * d.w, d, g, cols.data());
    gemm(false, false, f, hw, ckk, kernel.data().data(), ckk, cols.data(), hw, false,
         out.data().data() + s * f * hw, hw);
  }
  return out;
}

Tensor conv2d_input_adjoint(const Tensor& grad, const Tensor& kernel, Conv2dGeometry g,
                            std::size_t height, std::size_t width) {
  require_rank4(grad, "convolution gradient");
  require_rank4(kernel, "convolution kernel");
  if (grad.dim(1) != kernel.dim(0)) {
    throw ShapeError("transposed convolution channel mismatch: input " +
                     to_string(grad.shape()) + ", kernel " + to_string(kernel.shape()));
  }
  const std::size_t n = grad.dim(0), f = kernel.dim(0);
  ConvDims d{kernel.dim(1), height, width, kernel.dim(2), kernel.dim(3), grad.dim(2),
             grad.dim(3)};
  if (conv_out_extent(height, d.kh, g.stride, g.padding) != d.ho ||
      conv_out_extent(width, d.kw, g.stride, g.padding) != d.wo) {
    throw ShapeError("spatial extent " + std::to_string(height) + "x" + std::to_string(width) +
                     " inconsistent with gradient " + to_string(grad.shape()));
  }
  const std::size_t ckk = d.c * d.kh * d.kw, hw = d.ho * d.wo;
  Tensor out(Shape{n, d.c, height, width});
  std::vector<double> cols(ckk * hw);
  for (std::size_t s = 0; s < n; ++s) {
    gemm(true, false, ckk, hw, f, kernel.data().data(), ckk, grad.data().data() + s * f * hw,
         hw, false, cols.data(), hw);
    col2im(cols.data(), d, g, out.data().data() + s * d.c * height * width);
  }
  return out;
}

Tensor conv2d_kernel_adjoint(const Tensor& input, const Tensor& grad, Conv2dGeometry g,
                             std::size_t kh, std::size_t kw) {
  require_rank4(input, "convolution input");
  require_rank4(grad, "convolution gradient");
  if (input.dim(0) != grad.dim(0)) {
    throw ShapeError("batch mismatch between " + to_string(input.shape()) + " and " +
                     to_string(grad.shape()));
  }
  const std::size_t n = input.dim(0), f = grad.dim(1);
  ConvDims d{input.dim(1), input.dim(2), input.dim(3), kh, kw, grad.dim(2), grad.dim(3)};
  if (conv_out_extent(d.h, kh, g.stride, g.padding) != d.ho ||
      conv_out_extent(d.w, kw, g.stride, g.padding) != d.wo) {
    throw ShapeError("gradient " + to_string(grad.shape()) + " inconsistent with input " +
                     to_string(input.shape()));
  }
  const std::size_t ckk = d.c * kh * kw, hw = d.ho * d.wo;
  Tensor out(Shape{f, d.c, kh, kw});
  std::vector<double> cols(ckk * hw);
  for (std::size_t s = 0; s < n; ++s) {
    im2col(input.data().data() + s * d.c * d.h * d.w, d, g, cols.data());
    gemm(false, true, f, ckk, hw, grad.data().data() + s * f * hw, hw, cols.data(), hw, true,
         out.data().data(), ckk);
  }
  return out;
}

Tensor pool_sum(const Tensor& input, std::size_t window, Conv2dGeometry g) {
  require_rank4(input, "pool input");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t ho = conv_out_extent(h, window, g.stride, g.padding);
  const std::size_t wo = conv_out_extent(w, window, g.stride, g.padding);
  const long pad = static_cast<long>(g.padding);
  Tensor out(Shape{n, c, ho, wo});
  auto o = out.data();
  auto x = input.data();
  for (std::size_t p = 0; p < n * c; ++p)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double acc = 0.0;
        for (std::size_t i = 0; i < window; ++i) {
          const long y = static_cast<long>(oy * g.stride + i) - pad;
          if (y < 0 || y >= static_cast<long>(h)) continue;
          for (std::size_t j = 0; j < window; ++j) {
            const long xx = static_cast<long>(ox * g.stride + j) - pad;
            if (xx < 0 || xx >= static_cast<long>(w)) continue;
            acc += x[(p * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(xx)];
          }
        }
        o[(p * ho + oy) * wo + ox] = acc;
      }
  return out;
}

Tensor pool_sum_adjoint(const Tensor& grad, std::size_t window, Conv2dGeometry g,
                        std::size_t height, std::size_t width) {
  require_rank4(grad, "pool gradient");
  const std::size_t n = grad.dim(0), c = grad.dim(1), ho = grad.dim(2), wo = grad.dim(3);
  if (conv_out_extent(height, window, g.stride, g.padding) != ho ||
      conv_out_extent(width, window, g.stride, g.padding) != wo) {
    throw ShapeError("pool gradient " + to_string(grad.shape()) + " inconsistent with " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  const long pad = static_cast<long>(g.padding);
  Tensor out(Shape{n, c, height, width});
  auto o = out.data();
  auto gr = grad.data();
  for (std::size_t p = 0; p < n * c; ++p)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const double v = gr[(p * ho + oy) * wo + ox];
        for (std::size_t i = 0; i < window; ++i) {
          const long y = static_cast<long>(oy * g.stride + i) - pad;
          if (y < 0 || y >= static_cast<long>(height)) continue;
          for (std::size_t j = 0; j < window; ++j) {
            const long xx = static_cast<long>(ox * g.stride + j) - pad;
            if (xx < 0 || xx >= static_cast<long>(width)) continue;
            o[(p * height + static_cast<std::size_t>(y)) * width + static_cast<std::size_t>(xx)] +=
                v;
          }
        }
      }
  return out;
}

Tensor max_pool(const Tensor& input, std::size_t window, Conv2dGeometry g,
                std::vector<std::size_t>& argmax) {
  require_rank4(input, "pool input");
  if (g.padding >= window) throw ShapeError("max pool padding must be smaller than the window");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t ho = conv_out_extent(h, window, g.stride, g.padding);
  const std::size_t wo = conv_out_extent(w, window, g.stride, g.padding);
  const long pad = static_cast<long>(g.padding);
  Tensor out(Shape{n, c, ho, wo});
  argmax.assign(out.size(), 0);
  auto o = out.data();
  auto x = input.data();
  for (std::size_t p = 0; p < n * c; ++p)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_at = p * h * w;
        for (std::size_t i = 0; i < window; ++i) {
          const long y = static_cast<long>(oy * g.stride + i) - pad;
          if (y < 0 || y >= static_cast<long>(h)) continue;
          for (std::size_t j = 0; j < window; ++j) {
            const long xx = static_cast<long>(ox * g.stride + j) - pad;
            if (xx < 0 || xx >= static_cast<long>(w)) continue;
            const std::size_t at =
                (p * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(xx);
            if (x[at] > best) {
              best = x[at];
              best_at = at;
            }
          }
        }
        const std::size_t oi = (p * ho + oy) * wo + ox;
        o[oi] = best;
        argmax[oi] = best_at;
      }
  return out;
}

}  // namespace kernels

}  // namespace authorgan
