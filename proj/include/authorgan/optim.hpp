#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "authorgan/autograd.hpp"
#include "authorgan/layers.hpp"

namespace authorgan {

enum class OptimizerKind { adam, rmsprop, sgd };

std::string_view optimizer_palette_kind(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rho = 0.9;
  double epsilon = 1e-8;

  bool operator==(const OptimizerConfig&) const = default;
};

/// Reads an Adam / RMSProp / SGD palette spec (defaults filled from the schema).
OptimizerConfig optimizer_from_spec(const LayerSpec& spec);
/// Palette spec carrying only the parameters the kind uses.
LayerSpec optimizer_to_spec(const OptimizerConfig& config);

/// Per-parameter moment buffers plus the step counter.
///   Adam:    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
///            theta <- theta - lr * mhat / (sqrt(vhat) + eps), hats bias-corrected by t.
///   RMSProp: v <- rho v + (1-rho) g^2;  theta <- theta - lr g / (sqrt(v) + eps).
///   SGD:     theta <- theta - lr g.
struct OptimizerState {
  OptimizerConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::int64_t step_count = 0;

  explicit OptimizerState(OptimizerConfig c = {}) : config(c) {}
};

/// Updates params in place. Buffers are created on the first step and shaped
/// like their parameters; any later shape mismatch throws ShapeError.
void optimizer_step(OptimizerState& state, std::span<Tensor* const> params,
                    std::span<const Tensor> grads);

/// Steps every parameter with its accumulated gradient (zero when unreached)
/// and clears the gradients it consumed.
void optimizer_step(OptimizerState& state, const std::vector<Var>& params);

}  // namespace authorgan
