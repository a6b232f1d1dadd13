#pragma once

// Reference implementations used as test oracles. Deliberately naive: plain
// loops over the textbook definitions, sharing no code with the library.

#include <functional>
#include <string>
#include <vector>

#include "authorgan/autograd.hpp"
#include "authorgan/tensor.hpp"

namespace oracle {

using authorgan::Tensor;
using authorgan::Var;

Tensor matmul(const Tensor& a, const Tensor& b);

// Cross-correlation with zero padding. input [N,C,H,W], kernel [F,C,kh,kw].
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding);

// Transposed convolution by scattering every input pixel through the kernel.
// input [N,C,H,W], kernel [C,F,kh,kw].
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
                        std::size_t padding);

// Central differences of a scalar function of the listed variables against
// the autodiff gradients, returning max |a - n| / max(1, |n|).
double finite_difference_error(const std::function<Var()>& f, const std::vector<Var>& wrt,
                               double eps = 1e-5);

struct GradCase {
  std::string name;
  double error = 0.0;
};

// Every differentiable palette layer (input and parameter gradients), every
// loss, and the gradient-penalty double backward. Errors are the larger of
// the library grad_check and finite_difference_error.
std::vector<GradCase> gradient_suite();

}  // namespace oracle
