#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "authorgan/rng.hpp"

namespace authorgan {

/// Tensor extents, outermost first.
using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Result shape of broadcasting a against b: trailing axes are aligned and an
/// axis broadcasts iff one of the two extents is 1. Missing leading axes count
/// as 1. Throws ShapeError otherwise.
Shape broadcast_shapes(const Shape& a, const Shape& b);

/// Dense row-major float64 array. Scalars have shape [1]; no extent is zero.
class Tensor {
 public:
  Tensor() : Tensor(Shape{1}) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(Shape{1}, v); }
  static Tensor from(std::initializer_list<double> values);
  static Tensor randn(const Shape& shape, RngStream& rng);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double item() const;

  /// Same data, new extents of equal element count.
  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Raw numeric kernels on plain tensors. Graph-level operations in autograd.hpp
/// are built from these; the kernels themselves know nothing about gradients.
namespace kernels {

enum class BinaryKind { add, sub, mul, div };

Tensor binary(BinaryKind kind, const Tensor& a, const Tensor& b);
/// Sums x over broadcast axes down to `target`, which must broadcast to x.
Tensor sum_to(const Tensor& x, const Shape& target);
Tensor broadcast_to(const Tensor& x, const Shape& target);

/// C = op(A) * op(B) for rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false,
              bool transpose_b = false);
Tensor transpose2d(const Tensor& a);

struct Conv2dGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Output extent of a strided cross-correlation; throws ShapeError when < 1.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                            std::size_t padding);
/// Output extent of the transposed relation stride*(in-1)+kernel-2*padding.
std::size_t conv_transpose_out_extent(std::size_t in, std::size_t kernel,
                                      std::size_t stride, std::size_t padding);

/// Cross-correlation. input [N,C,H,W], kernel [F,C,kh,kw] -> [N,F,Ho,Wo].
Tensor conv2d(const Tensor& input, const Tensor& kernel, Conv2dGeometry g);
/// Adjoint of conv2d with respect to its input. grad [N,F,Ho,Wo] with kernel
/// [F,C,kh,kw] -> [N,C,H,W]; (H,W) given by `spatial`. This is also the
/// transposed convolution.
Tensor conv2d_input_adjoint(const Tensor& grad, const Tensor& kernel, Conv2dGeometry g,
                            std::size_t height, std::size_t width);
/// Adjoint of conv2d with respect to its kernel: input [N,C,H,W], grad
/// [N,F,Ho,Wo] -> [F,C,kh,kw].
Tensor conv2d_kernel_adjoint(const Tensor& input, const Tensor& grad, Conv2dGeometry g,
                             std::size_t kh, std::size_t kw);

/// Window sums over [N,C,H,W] with zero padding.
Tensor pool_sum(const Tensor& input, std::size_t window, Conv2dGeometry g);
/// Adjoint of pool_sum: scatters each window value back over its window.
Tensor pool_sum_adjoint(const Tensor& grad, std::size_t window, Conv2dGeometry g,
                        std::size_t height, std::size_t width);

/// Max pooling; `argmax` receives the flat input index of each winner.
Tensor max_pool(const Tensor& input, std::size_t window, Conv2dGeometry g,
                std::vector<std::size_t>& argmax);

}  // namespace kernels

}  // namespace authorgan
