#include "authorgan/optim.hpp"

#include <cmath>

#include "authorgan/error.hpp"

namespace authorgan {

std::string_view optimizer_palette_kind(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::adam: return "Adam";
    case OptimizerKind::rmsprop: return "RMSProp";
    case OptimizerKind::sgd: return "SGD";
  }
  return "unknown";
}

OptimizerConfig optimizer_from_spec(const LayerSpec& raw) {
  const LayerSpec spec = with_defaults(raw);
  OptimizerConfig c;
  if (spec.kind == "Adam") {
    c.kind = OptimizerKind::adam;
    c.beta1 = get_number(spec, "beta1");
    c.beta2 = get_number(spec, "beta2");
  } else if (spec.kind == "RMSProp") {
    c.kind = OptimizerKind::rmsprop;
    c.rho = get_number(spec, "rho");
  } else if (spec.kind == "SGD") {
    c.kind = OptimizerKind::sgd;
  } else {
    throw ParamError("kind", "'" + spec.kind + "' is not an optimizer (expected Adam, RMSProp or SGD)");
  }
  c.lr = get_number(spec, "lr");
  if (c.kind != OptimizerKind::sgd) c.epsilon = get_number(spec, "epsilon");
  return c;
}

LayerSpec optimizer_to_spec(const OptimizerConfig& c) {
  LayerSpec s{std::string(optimizer_palette_kind(c.kind)), {}};
  s.params["lr"] = c.lr;
  switch (c.kind) {
    case OptimizerKind::adam:
      s.params["beta1"] = c.beta1;
      s.params["beta2"] = c.beta2;
      s.params["epsilon"] = c.epsilon;
      break;
    case OptimizerKind::rmsprop:
      s.params["rho"] = c.rho;
      s.params["epsilon"] = c.epsilon;
      break;
    case OptimizerKind::sgd:
      break;
  }
  return s;
}

void optimizer_step(OptimizerState& state, std::span<Tensor* const> params,
                    std::span<const Tensor> grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("optimizer received " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape()) {
      throw ShapeError("gradient " + to_string(grads[i].shape()) + " does not match parameter " +
                       to_string(params[i]->shape()));
    }
  }
  const auto& c = state.config;
  const bool needs_first = c.kind == OptimizerKind::adam;
  const bool needs_second = c.kind != OptimizerKind::sgd;
  if (needs_second && state.second_moment.empty()) {
    for (auto* p : params) {
      state.second_moment.emplace_back(p->shape());
      if (needs_first) state.first_moment.emplace_back(p->shape());
    }
  }
  if (needs_second && state.second_moment.size() != params.size()) {
    throw ShapeError("optimizer state tracks " + std::to_string(state.second_moment.size()) +
                     " parameters, step received " + std::to_string(params.size()));
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);

  for (std::size_t i = 0; i < params.size(); ++i) {
    if ((needs_second && state.second_moment[i].shape() != params[i]->shape()) ||
        (needs_first && state.first_moment[i].shape() != params[i]->shape())) {
      throw ShapeError("optimizer buffer shape changed for parameter " + std::to_string(i));
    }
    double* __restrict theta = params[i]->data().data();
    const double* __restrict g = grads[i].data().data();
    const std::size_t n = params[i]->size();
    switch (c.kind) {
      case OptimizerKind::sgd:
        for (std::size_t j = 0; j < n; ++j) theta[j] -= c.lr * g[j];
        break;
      case OptimizerKind::rmsprop: {
        double* __restrict v = state.second_moment[i].data().data();
        for (std::size_t j = 0; j < n; ++j) {
          v[j] = c.rho * v[j] + (1.0 - c.rho) * g[j] * g[j];
          theta[j] -= c.lr * g[j] / (std::sqrt(v[j]) + c.epsilon);
        }
        break;
      }
      case OptimizerKind::adam: {
        double* __restrict m = state.first_moment[i].data().data();
        double* __restrict v = state.second_moment[i].data().data();
        // lr * m_hat / (sqrt(v_hat) + eps) with the bias corrections hoisted
        const double step = c.lr / (1.0 - std::pow(c.beta1, t));
        const double inv_sqrt_bc2 = 1.0 / std::sqrt(1.0 - std::pow(c.beta2, t));
        for (std::size_t j = 0; j < n; ++j) {
          m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
          v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
          theta[j] -= step * m[j] / (std::sqrt(v[j]) * inv_sqrt_bc2 + c.epsilon);
        }
        break;
      }
    }
  }
}

void optimizer_step(OptimizerState& state, const std::vector<Var>& params) {
  std::vector<Tensor*> values;
  std::vector<Tensor> grads;
  values.reserve(params.size());
  grads.reserve(params.size());
  for (auto p : params) {
    values.push_back(&p.mutable_value());
    grads.push_back(p.grad() ? std::move(*p.node()->grad) : Tensor(p.shape()));
    p.zero_grad();
  }
  optimizer_step(state, values, grads);
}

}  // namespace authorgan
