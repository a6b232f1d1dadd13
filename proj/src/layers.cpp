#include "authorgan/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace authorgan {

namespace {

using kernels::Conv2dGeometry;

ParamSchema required(std::string name, ParamType type, ParamConstraint c = {}) {
  return ParamSchema{std::move(name), type, std::nullopt, std::move(c)};
}

ParamSchema optional(std::string name, ParamType type, ParamValue def, ParamConstraint c = {}) {
  return ParamSchema{std::move(name), type, std::move(def), std::move(c)};
}

ParamConstraint at_least(double v) { return ParamConstraint{v, std::nullopt}; }
ParamConstraint positive() { return ParamConstraint{0.0, std::nullopt, true}; }
ParamConstraint unit_interval_open_high() { return ParamConstraint{0.0, 1.0, false, true}; }

std::vector<ParamSchema> conv_params() {
  return {required("filters", ParamType::integer, at_least(1)),
          optional("kernel", ParamType::integer, std::int64_t{3}, at_least(1)),
          optional("stride", ParamType::integer, std::int64_t{1}, at_least(1)),
          optional("padding", ParamType::integer, std::int64_t{0}, at_least(0)),
          optional("bias", ParamType::boolean, true)};
}

std::vector<ParamSchema> pool_params() {
  // stride 0 means "same as pool"
  return {optional("pool", ParamType::integer, std::int64_t{2}, at_least(1)),
          optional("stride", ParamType::integer, std::int64_t{0}, at_least(0)),
          optional("padding", ParamType::integer, std::int64_t{0}, at_least(0))};
}

std::vector<ParamSchema> recurrent_params() {
  return {required("units", ParamType::integer, at_least(1)),
          optional("return_sequences", ParamType::boolean, false)};
}

std::vector<PaletteEntry> make_palette() {
  using C = LayerCategory;
  using T = ParamType;
  std::vector<PaletteEntry> p = {
      {"Conv2D", C::convolutional, "Conv 2D", conv_params(),
       "Strided cross-correlation over [C,H,W] with zero padding."},
      {"ConvTranspose2D", C::convolutional, "Transposed Conv 2D", conv_params(),
       "Transposed convolution; output extent stride*(H-1)+kernel-2*padding."},
      {"MaxPool2D", C::convolutional, "Max Pool 2D", pool_params(), "Window maximum."},
      {"AvgPool2D", C::convolutional, "Average Pool 2D", pool_params(),
       "Window mean; padded zeros count toward the mean."},
      {"UpSample2D", C::convolutional, "Upsample 2D",
       {optional("scale", T::integer, std::int64_t{2}, at_least(1))},
       "Nearest-neighbour upsampling by an integer factor."},
      {"SimpleRNN", C::recurrent, "Simple RNN", recurrent_params(),
       "Elman recurrence over [T,D]. Shape inference only; not executable."},
      {"LSTM", C::recurrent, "LSTM", recurrent_params(),
       "Long short-term memory over [T,D]. Shape inference only; not executable."},
      {"GRU", C::recurrent, "GRU", recurrent_params(),
       "Gated recurrent unit over [T,D]. Shape inference only; not executable."},
      {"Dense", C::core, "Dense",
       {required("units", T::integer, at_least(1)), optional("bias", T::boolean, true)},
       "Fully connected layer on rank-1 features."},
      {"Flatten", C::core, "Flatten", {}, "Collapses all non-batch axes."},
      {"Reshape", C::core, "Reshape", {required("shape", T::shape)},
       "Reinterprets features with the given extents."},
      {"Dropout", C::core, "Dropout",
       {optional("rate", T::number, 0.5, unit_interval_open_high())},
       "Inverted dropout in train mode, identity in eval mode."},
      {"Concatenate", C::core, "Concatenate",
       {optional("with", T::string, std::string("labels"),
                 ParamConstraint{std::nullopt, std::nullopt, false, false, {"labels"}})},
       "Appends one-hot class labels: as features for rank-1 input, as constant "
       "channels for [C,H,W] input."},
      {"Embedding", C::core, "Embedding",
       {required("vocab", T::integer, at_least(1)), required("dim", T::integer, at_least(1))},
       "Looks up integer indices [T] in a [vocab,dim] table."},
      {"Input", C::core, "Input", {optional("shape", T::shape, std::vector<std::int64_t>{})},
       "Marks the network input; an explicit shape must match the inferred one."},
      {"Output", C::core, "Output", {}, "Marks the network output."},
      {"ReLU", C::activation, "ReLU", {}, "max(0, x)."},
      {"LeakyReLU", C::activation, "Leaky ReLU",
       {optional("alpha", T::number, 0.2, at_least(0))}, "x for x > 0, alpha*x otherwise."},
      {"Sigmoid", C::activation, "Sigmoid", {}, "Logistic function."},
      {"Tanh", C::activation, "Tanh", {}, "Hyperbolic tangent."},
      {"Softmax", C::activation, "Softmax", {}, "Normalized exponential over axis 1."},
      {"ELU", C::activation, "ELU", {optional("alpha", T::number, 1.0, positive())},
       "x for x > 0, alpha*(exp(x)-1) otherwise."},
      {"BCE", C::loss, "Binary Cross-Entropy", {},
       "-mean[y ln p + (1-y) ln(1-p)], p clamped to [1e-7, 1-1e-7]."},
      {"MSE", C::loss, "Mean Squared Error", {}, "mean (p - y)^2."},
      {"L1", C::loss, "Mean Absolute Error", {}, "mean |p - y|."},
      {"Wasserstein", C::loss, "Wasserstein", {},
       "Critic: mean(fake) - mean(real); generator: -mean(fake)."},
      {"Adam", C::optimization, "Adam",
       {optional("lr", T::number, 1e-3, positive()),
        optional("beta1", T::number, 0.9, unit_interval_open_high()),
        optional("beta2", T::number, 0.999, unit_interval_open_high()),
        optional("epsilon", T::number, 1e-8, positive())},
       "Adaptive moments with bias correction."},
      {"RMSProp", C::optimization, "RMSProp",
       {optional("lr", T::number, 1e-3, positive()),
        optional("rho", T::number, 0.9, unit_interval_open_high()),
        optional("epsilon", T::number, 1e-8, positive())},
       "Running mean of squared gradients."},
      {"SGD", C::optimization, "SGD", {optional("lr", T::number, 1e-2, positive())},
       "Plain gradient descent."},
      {"BatchNorm", C::normalization, "Batch Normalization",
       {optional("momentum", T::number, 0.1, ParamConstraint{0.0, 1.0}),
        optional("epsilon", T::number, 1e-5, positive())},
       "Per-feature (rank 1) or per-channel ([C,H,W]) batch statistics."},
      {"LayerNorm", C::normalization, "Layer Normalization",
       {optional("epsilon", T::number, 1e-5, positive())},
       "Per-sample statistics over all feature axes."},
  };
  std::stable_sort(p.begin(), p.end(), [](const PaletteEntry& a, const PaletteEntry& b) {
    if (a.category != b.category) return a.category < b.category;
    return a.kind < b.kind;
  });
  return p;
}

bool is_integral(double v) { return std::isfinite(v) && std::floor(v) == v; }

// Converts a value to the schema type when the conversion is lossless.
std::optional<ParamValue> coerce(const ParamValue& v, ParamType type) {
  switch (type) {
    case ParamType::integer:
      if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
      if (auto* d = std::get_if<double>(&v); d && is_integral(*d)) {
        return static_cast<std::int64_t>(*d);
      }
      return std::nullopt;
    case ParamType::number:
      if (auto* d = std::get_if<double>(&v)) return *d;
      if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
      return std::nullopt;
    case ParamType::boolean:
      if (auto* b = std::get_if<bool>(&v)) return *b;
      return std::nullopt;
    case ParamType::string:
      if (auto* s = std::get_if<std::string>(&v)) return *s;
      return std::nullopt;
    case ParamType::shape:
      if (auto* s = std::get_if<std::vector<std::int64_t>>(&v)) return *s;
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<std::string> violates(const ParamSchema& schema, const ParamValue& v) {
  const auto& c = schema.constraint;
  if (!c.one_of.empty()) {
    const auto* s = std::get_if<std::string>(&v);
    if (!s || std::find(c.one_of.begin(), c.one_of.end(), *s) == c.one_of.end()) {
      return "must be " + c.describe();
    }
  }
  double x = 0;
  if (auto* i = std::get_if<std::int64_t>(&v)) {
    x = static_cast<double>(*i);
  } else if (auto* d = std::get_if<double>(&v)) {
    x = *d;
  } else if (auto* s = std::get_if<std::vector<std::int64_t>>(&v)) {
    for (auto e : *s) {
      if (e < 1) return std::string("extents must be >= 1");
    }
    return std::nullopt;
  } else {
    return std::nullopt;
  }
  if (!std::isfinite(x)) return std::string("must be finite");
  if (c.min && (c.exclusive_min ? x <= *c.min : x < *c.min)) return "must be " + c.describe();
  if (c.max && (c.exclusive_max ? x >= *c.max : x > *c.max)) return "must be " + c.describe();
  return std::nullopt;
}

std::string fmt_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

const ParamValue& lookup(const LayerSpec& spec, const std::string& key) {
  auto it = spec.params.find(key);
  if (it != spec.params.end()) return it->second;
  if (const auto* entry = find_palette_entry(spec.kind)) {
    for (const auto& s : entry->params) {
      if (s.name == key && s.default_value) return *s.default_value;
    }
  }
  throw ParamError(key, spec.kind + ": missing parameter '" + key + "'");
}

std::size_t as_extent(std::int64_t v, const std::string& what) {
  if (v < 1) throw ShapeError(what + " must be >= 1");
  return static_cast<std::size_t>(v);
}

void require_rank(const LayerSpec& spec, const Shape& in, std::size_t rank, const char* hint) {
  if (in.size() != rank) {
    throw ShapeError(spec.kind + " expects rank-" + std::to_string(rank) + " input " + hint +
                     ", got " + to_string(in));
  }
}

Var add_channel_bias(const Var& y, const Var& bias) {
  return add(y, reshape(bias, Shape{1, bias.shape()[0], 1, 1}));
}

Shape batch_shape(std::size_t n, const Shape& features) {
  Shape s{n};
  s.insert(s.end(), features.begin(), features.end());
  return s;
}

// Statistic shape for BatchNorm: per feature for [N,D], per channel for [N,C,H,W].
Shape batch_stat_shape(const Shape& x) {
  Shape s(x.size(), 1);
  s[1] = x[1];
  return s;
}

Var normalize(const Var& x, const Shape& stat_shape, double count, double eps, Var* mean_out,
              Var* var_out) {
  Var mu = scale(sum_to(x, stat_shape), 1.0 / count);
  Var centered = sub(x, mu);
  Var var = scale(sum_to(square(centered), stat_shape), 1.0 / count);
  if (mean_out) *mean_out = mu;
  if (var_out) *var_out = var;
  return div(centered, sqrt(add_scalar(var, eps)));
}

}  // namespace

std::string_view category_name(LayerCategory c) {
  switch (c) {
    case LayerCategory::convolutional: return "convolutional";
    case LayerCategory::recurrent: return "recurrent";
    case LayerCategory::core: return "core";
    case LayerCategory::activation: return "activation";
    case LayerCategory::loss: return "loss";
    case LayerCategory::optimization: return "optimization";
    case LayerCategory::normalization: return "normalization";
  }
  return "unknown";
}

std::string_view param_type_name(ParamType t) {
  switch (t) {
    case ParamType::integer: return "integer";
    case ParamType::number: return "number";
    case ParamType::boolean: return "boolean";
    case ParamType::string: return "string";
    case ParamType::shape: return "shape";
  }
  return "unknown";
}

std::string describe(const ParamValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using X = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<X, std::int64_t>) {
          return std::to_string(x);
        } else if constexpr (std::is_same_v<X, double>) {
          return fmt_number(x);
        } else if constexpr (std::is_same_v<X, bool>) {
          return x ? "true" : "false";
        } else if constexpr (std::is_same_v<X, std::string>) {
          return '"' + x + '"';
        } else {
          std::string s = "[";
          for (std::size_t i = 0; i < x.size(); ++i) s += (i ? "," : "") + std::to_string(x[i]);
          return s + "]";
        }
      },
      v);
}

std::string ParamConstraint::describe() const {
  if (!one_of.empty()) {
    std::string s = "one of {";
    for (std::size_t i = 0; i < one_of.size(); ++i) s += (i ? ", " : "") + one_of[i];
    return s + "}";
  }
  if (min && max) {
    return "in " + std::string(exclusive_min ? "(" : "[") + fmt_number(*min) + ", " +
           fmt_number(*max) + (exclusive_max ? ")" : "]");
  }
  if (min) return (exclusive_min ? "> " : ">= ") + fmt_number(*min);
  if (max) return (exclusive_max ? "< " : "<= ") + fmt_number(*max);
  return {};
}

const std::vector<PaletteEntry>& palette() {
  static const std::vector<PaletteEntry> entries = make_palette();
  return entries;
}

const PaletteEntry* find_palette_entry(std::string_view kind) {
  for (const auto& e : palette()) {
    if (e.kind == kind) return &e;
  }
  return nullptr;
}

std::vector<ParamIssue> check_params(const LayerSpec& spec) {
  std::vector<ParamIssue> issues;
  const PaletteEntry* entry = find_palette_entry(spec.kind);
  if (!entry) {
    issues.push_back({"", "unknown layer kind '" + spec.kind + "'"});
    return issues;
  }
  for (const auto& [key, value] : spec.params) {
    auto it = std::find_if(entry->params.begin(), entry->params.end(),
                           [&](const ParamSchema& s) { return s.name == key; });
    if (it == entry->params.end()) {
      std::string known;
      for (const auto& s : entry->params) known += (known.empty() ? "" : ", ") + s.name;
      issues.push_back({key, spec.kind + ": unknown parameter '" + key + "'" +
                                 (known.empty() ? " (takes no parameters)"
                                                : " (expected one of: " + known + ")")});
      continue;
    }
    auto typed = coerce(value, it->type);
    if (!typed) {
      issues.push_back({key, spec.kind + ": parameter '" + key + "' must be of type " +
                                 std::string(param_type_name(it->type)) + ", got " +
                                 describe(value)});
      continue;
    }
    if (auto why = violates(*it, *typed)) {
      issues.push_back({key, spec.kind + ": parameter '" + key + "' " + *why + ", got " +
                                 describe(value)});
    }
  }
  for (const auto& s : entry->params) {
    if (!s.default_value && !spec.params.contains(s.name)) {
      issues.push_back({s.name, spec.kind + ": missing required parameter '" + s.name + "'"});
    }
  }
  return issues;
}

LayerSpec with_defaults(const LayerSpec& spec) {
  auto issues = check_params(spec);
  if (!issues.empty()) throw ParamError(issues.front().key, issues.front().message);
  const PaletteEntry* entry = find_palette_entry(spec.kind);
  LayerSpec out{spec.kind, {}};
  for (const auto& s : entry->params) {
    auto it = spec.params.find(s.name);
    if (it != spec.params.end()) {
      out.params[s.name] = *coerce(it->second, s.type);
    } else {
      out.params[s.name] = *s.default_value;
    }
  }
  return out;
}

std::int64_t get_int(const LayerSpec& spec, const std::string& key) {
  auto v = coerce(lookup(spec, key), ParamType::integer);
  if (!v) throw ParamError(key, spec.kind + ": parameter '" + key + "' is not an integer");
  return std::get<std::int64_t>(*v);
}

double get_number(const LayerSpec& spec, const std::string& key) {
  auto v = coerce(lookup(spec, key), ParamType::number);
  if (!v) throw ParamError(key, spec.kind + ": parameter '" + key + "' is not a number");
  return std::get<double>(*v);
}

bool get_bool(const LayerSpec& spec, const std::string& key) {
  const auto& v = lookup(spec, key);
  if (auto* b = std::get_if<bool>(&v)) return *b;
  throw ParamError(key, spec.kind + ": parameter '" + key + "' is not a boolean");
}

const std::string& get_string(const LayerSpec& spec, const std::string& key) {
  const auto& v = lookup(spec, key);
  if (auto* s = std::get_if<std::string>(&v)) return *s;
  throw ParamError(key, spec.kind + ": parameter '" + key + "' is not a string");
}

Shape get_shape(const LayerSpec& spec, const std::string& key) {
  const auto& v = lookup(spec, key);
  const auto* s = std::get_if<std::vector<std::int64_t>>(&v);
  if (!s) throw ParamError(key, spec.kind + ": parameter '" + key + "' is not a shape");
  Shape out;
  for (auto e : *s) out.push_back(as_extent(e, spec.kind + " " + key + " extent"));
  return out;
}

Tensor init_params(ParamInit kind, const Shape& shape, std::size_t fan_in, std::size_t fan_out,
                   RngStream& rng) {
  Tensor t(shape);
  switch (kind) {
    case ParamInit::dense_weight: {
      const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
      for (auto& v : t.data()) v = std * rng.normal();
      break;
    }
    case ParamInit::conv_weight:
      for (auto& v : t.data()) v = 0.02 * rng.normal();
      break;
    case ParamInit::norm_scale:
      for (auto& v : t.data()) v = 1.0 + 0.02 * rng.normal();
      break;
    case ParamInit::bias:
    case ParamInit::norm_shift:
      break;
  }
  return t;
}

LayerInstance build_layer(const LayerSpec& raw, const Shape& in, RngStream& rng,
                          const BuildContext& ctx) {
  LayerInstance layer;
  layer.spec_ = with_defaults(raw);
  const LayerSpec& spec = layer.spec_;
  layer.entry_ = find_palette_entry(spec.kind);
  if (!layer.entry_->is_graph_layer()) {
    throw ContractError(spec.kind + " is a " + std::string(category_name(layer.entry_->category)) +
                        " node, not a graph layer");
  }
  if (in.empty()) throw ShapeError(spec.kind + ": input shape is empty");
  layer.input_shape_ = in;
  const std::string& k = spec.kind;

  if (k == "Conv2D" || k == "ConvTranspose2D") {
    require_rank(spec, in, 3, "[C,H,W]");
    const auto f = as_extent(get_int(spec, "filters"), "filters");
    const auto kk = as_extent(get_int(spec, "kernel"), "kernel");
    const auto s = static_cast<std::size_t>(get_int(spec, "stride"));
    const auto p = static_cast<std::size_t>(get_int(spec, "padding"));
    const std::size_t c = in[0];
    if (k == "Conv2D") {
      layer.output_shape_ = {f, kernels::conv_out_extent(in[1], kk, s, p),
                             kernels::conv_out_extent(in[2], kk, s, p)};
      layer.params_.emplace_back(
          "weight", parameter(init_params(ParamInit::conv_weight, {f, c, kk, kk}, c * kk * kk,
                                          f * kk * kk, rng)));
    } else {
      layer.output_shape_ = {f, kernels::conv_transpose_out_extent(in[1], kk, s, p),
                             kernels::conv_transpose_out_extent(in[2], kk, s, p)};
      layer.params_.emplace_back(
          "weight", parameter(init_params(ParamInit::conv_weight, {c, f, kk, kk}, c * kk * kk,
                                          f * kk * kk, rng)));
    }
    if (get_bool(spec, "bias")) {
      layer.params_.emplace_back("bias", parameter(init_params(ParamInit::bias, {f}, 0, 0, rng)));
    }
  } else if (k == "MaxPool2D" || k == "AvgPool2D") {
    require_rank(spec, in, 3, "[C,H,W]");
    const auto w = as_extent(get_int(spec, "pool"), "pool");
    auto s = static_cast<std::size_t>(get_int(spec, "stride"));
    if (s == 0) s = w;
    const auto p = static_cast<std::size_t>(get_int(spec, "padding"));
    if (p >= w) throw ShapeError(k + ": padding must be smaller than pool");
    layer.output_shape_ = {in[0], kernels::conv_out_extent(in[1], w, s, p),
                           kernels::conv_out_extent(in[2], w, s, p)};
  } else if (k == "UpSample2D") {
    require_rank(spec, in, 3, "[C,H,W]");
    const auto f = as_extent(get_int(spec, "scale"), "scale");
    layer.output_shape_ = {in[0], in[1] * f, in[2] * f};
  } else if (layer.entry_->category == LayerCategory::recurrent) {
    require_rank(spec, in, 2, "[T,D]");
    const auto u = as_extent(get_int(spec, "units"), "units");
    layer.output_shape_ = get_bool(spec, "return_sequences") ? Shape{in[0], u} : Shape{u};
  } else if (k == "Dense") {
    require_rank(spec, in, 1, "[D] (add a Flatten layer first)");
    const auto u = as_extent(get_int(spec, "units"), "units");
    layer.output_shape_ = {u};
    layer.params_.emplace_back(
        "weight", parameter(init_params(ParamInit::dense_weight, {in[0], u}, in[0], u, rng)));
    if (get_bool(spec, "bias")) {
      layer.params_.emplace_back("bias", parameter(init_params(ParamInit::bias, {u}, 0, 0, rng)));
    }
  } else if (k == "Flatten") {
    layer.output_shape_ = {numel(in)};
  } else if (k == "Reshape") {
    Shape target = get_shape(spec, "shape");
    if (target.empty() || numel(target) != numel(in)) {
      throw ShapeError("Reshape cannot map " + to_string(in) + " (" + std::to_string(numel(in)) +
                       " values) to " + to_string(target));
    }
    layer.output_shape_ = std::move(target);
  } else if (k == "Concatenate") {
    if (in.size() == 1) {
      layer.output_shape_ = {in[0] + ctx.label_count};
    } else if (in.size() == 3) {
      layer.output_shape_ = {in[0] + ctx.label_count, in[1], in[2]};
    } else {
      throw ShapeError("Concatenate expects [D] or [C,H,W] input, got " + to_string(in));
    }
  } else if (k == "Embedding") {
    require_rank(spec, in, 1, "[T] of integer indices");
    const auto vocab = as_extent(get_int(spec, "vocab"), "vocab");
    const auto dim = as_extent(get_int(spec, "dim"), "dim");
    layer.output_shape_ = {in[0], dim};
    layer.params_.emplace_back(
        "weight", parameter(init_params(ParamInit::dense_weight, {vocab, dim}, vocab, dim, rng)));
  } else if (k == "Input") {
    Shape declared = get_shape(spec, "shape");
    if (!declared.empty() && declared != in) {
      throw ShapeError("Input declares shape " + to_string(declared) + " but receives " +
                       to_string(in));
    }
    layer.output_shape_ = in;
  } else if (k == "BatchNorm") {
    if (in.size() != 1 && in.size() != 3) {
      throw ShapeError("BatchNorm expects [D] or [C,H,W] input, got " + to_string(in));
    }
    const std::size_t c = in[0];
    layer.output_shape_ = in;
    layer.params_.emplace_back("scale",
                               parameter(init_params(ParamInit::norm_scale, {c}, c, c, rng)));
    layer.params_.emplace_back("shift",
                               parameter(init_params(ParamInit::norm_shift, {c}, c, c, rng)));
    layer.buffers_["running_mean"] = Tensor(Shape{c}, 0.0);
    layer.buffers_["running_var"] = Tensor(Shape{c}, 1.0);
  } else if (k == "LayerNorm") {
    layer.output_shape_ = in;
    const std::size_t n = numel(in);
    layer.params_.emplace_back("scale", parameter(Tensor(in, 1.0)));
    layer.params_.emplace_back("shift", parameter(init_params(ParamInit::norm_shift, in, n, n, rng)));
  } else {
    // Dropout, Output and activations preserve shape.
    layer.output_shape_ = in;
  }
  return layer;
}

Var LayerInstance::forward(const Var& x, ForwardContext& ctx) {
  const Shape& xs = x.shape();
  if (xs.size() != input_shape_.size() + 1 ||
      !std::equal(input_shape_.begin(), input_shape_.end(), xs.begin() + 1)) {
    throw ShapeError(spec_.kind + " expects input [N]+" + to_string(input_shape_) + ", got " +
                     to_string(xs));
  }
  const std::size_t n = xs[0];
  const std::string& k = spec_.kind;
  auto param = [this](std::string_view name) -> const Var& {
    for (const auto& [pn, v] : params_) {
      if (pn == name) return v;
    }
    static const Var none;
    return none;
  };

  if (k == "Conv2D") {
    Conv2dGeometry g{static_cast<std::size_t>(get_int(spec_, "stride")),
                     static_cast<std::size_t>(get_int(spec_, "padding"))};
    Var y = conv2d(x, param("weight"), g);
    return param("bias").defined() ? add_channel_bias(y, param("bias")) : y;
  }
  if (k == "ConvTranspose2D") {
    Conv2dGeometry g{static_cast<std::size_t>(get_int(spec_, "stride")),
                     static_cast<std::size_t>(get_int(spec_, "padding"))};
    Var y = conv_transpose2d(x, param("weight"), g);
    return param("bias").defined() ? add_channel_bias(y, param("bias")) : y;
  }
  if (k == "MaxPool2D" || k == "AvgPool2D") {
    const auto w = static_cast<std::size_t>(get_int(spec_, "pool"));
    auto s = static_cast<std::size_t>(get_int(spec_, "stride"));
    Conv2dGeometry g{s == 0 ? w : s, static_cast<std::size_t>(get_int(spec_, "padding"))};
    return k == "MaxPool2D" ? max_pool2d(x, w, g) : avg_pool2d(x, w, g);
  }
  if (k == "UpSample2D") {
    return upsample_nearest(x, static_cast<std::size_t>(get_int(spec_, "scale")));
  }
  if (entry_->category == LayerCategory::recurrent) {
    throw ContractError("unsupported kind: " + k + " cannot be executed");
  }
  if (k == "Dense") {
    Var y = matmul(x, param("weight"));
    return param("bias").defined() ? add(y, param("bias")) : y;
  }
  if (k == "Flatten" || k == "Reshape") return reshape(x, batch_shape(n, output_shape_));
  if (k == "Dropout") {
    const double rate = get_number(spec_, "rate");
    if (ctx.mode == Mode::eval || rate == 0.0) return x;
    if (!ctx.rng) throw ContractError("Dropout in train mode needs a random stream");
    Tensor mask(xs);
    const double keep = 1.0 - rate;
    for (auto& m : mask.data()) m = ctx.rng->uniform() < keep ? 1.0 / keep : 0.0;
    return mul(x, constant(std::move(mask)));
  }
  if (k == "Concatenate") {
    if (!ctx.labels.defined()) {
      throw ContractError("Concatenate(with=labels) requires class labels for the batch");
    }
    const Shape& ls = ctx.labels.shape();
    if (ls.size() != 2 || ls[0] != n || input_shape_.size() + 1 != xs.size() ||
        output_shape_[0] != input_shape_[0] + ls[1]) {
      throw ShapeError("label block " + to_string(ls) + " does not fit Concatenate output " +
                       to_string(output_shape_));
    }
    if (xs.size() == 2) return concat(x, ctx.labels);
    Var maps = broadcast_to(reshape(ctx.labels, Shape{n, ls[1], 1, 1}),
                            Shape{n, ls[1], xs[2], xs[3]});
    return concat(x, maps);
  }
  if (k == "Embedding") {
    const Var& table = param("weight");
    const std::size_t vocab = table.shape()[0], dim = table.shape()[1];
    auto index = std::make_shared<std::vector<std::size_t>>();
    index->reserve(x.value().size() * dim);
    for (double v : x.value().data()) {
      if (v < 0 || v >= static_cast<double>(vocab) || std::floor(v) != v) {
        throw ContractError("Embedding index " + fmt_number(v) + " outside [0, " +
                            std::to_string(vocab) + ")");
      }
      const auto row = static_cast<std::size_t>(v);
      for (std::size_t d = 0; d < dim; ++d) index->push_back(row * dim + d);
    }
    return gather(table, std::move(index), batch_shape(n, output_shape_));
  }
  if (k == "Input" || k == "Output") return x;
  if (k == "ReLU") return relu(x);
  if (k == "LeakyReLU") return leaky_relu(x, get_number(spec_, "alpha"));
  if (k == "Sigmoid") return sigmoid(x);
  if (k == "Tanh") return tanh(x);
  if (k == "ELU") return elu(x, get_number(spec_, "alpha"));
  if (k == "Softmax") {
    Shape red = xs;
    red[1] = 1;
    // per-row maximum as a constant shift for stability
    Tensor shift(red, -std::numeric_limits<double>::infinity());
    const std::size_t c = xs[1], inner = x.value().size() / (n * c);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < c; ++j)
        for (std::size_t i = 0; i < inner; ++i) {
          double& m = shift[b * inner + i];
          m = std::max(m, x.value()[(b * c + j) * inner + i]);
        }
    Var e = exp(sub(x, constant(std::move(shift))));
    return div(e, sum_to(e, red));
  }
  if (k == "BatchNorm") {
    const Shape stat = batch_stat_shape(xs);
    const double eps = get_number(spec_, "epsilon");
    const Var& gamma = param("scale");
    const Var& beta = param("shift");
    Var xhat;
    if (ctx.mode == Mode::train) {
      const double count = static_cast<double>(x.value().size() / xs[1]);
      Var mu, var;
      xhat = normalize(x, stat, count, eps, &mu, &var);
      const double momentum = get_number(spec_, "momentum");
      const double unbias = count > 1 ? count / (count - 1) : 1.0;
      auto& rm = buffers_["running_mean"];
      auto& rv = buffers_["running_var"];
      for (std::size_t c = 0; c < rm.size(); ++c) {
        rm[c] = (1 - momentum) * rm[c] + momentum * mu.value()[c];
        rv[c] = (1 - momentum) * rv[c] + momentum * var.value()[c] * unbias;
      }
    } else {
      Tensor rm = buffers_["running_mean"].reshaped(stat);
      Tensor inv = buffers_["running_var"].reshaped(stat);
      for (auto& v : inv.data()) v = 1.0 / std::sqrt(v + eps);
      xhat = mul(sub(x, constant(std::move(rm))), constant(std::move(inv)));
    }
    return add(mul(xhat, reshape(gamma, stat)), reshape(beta, stat));
  }
  if (k == "LayerNorm") {
    Shape stat(xs.size(), 1);
    stat[0] = n;
    const double count = static_cast<double>(numel(input_shape_));
    Var xhat = normalize(x, stat, count, get_number(spec_, "epsilon"), nullptr, nullptr);
    return add(mul(xhat, param("scale")), param("shift"));
  }
  throw ContractError("no forward rule for layer kind " + k);
}

LayerInstance LayerInstance::clone() const {
  LayerInstance copy = *this;
  for (auto& [name, v] : copy.params_) {
    Var fresh = parameter(v.value());
    fresh.set_requires_grad(v.requires_grad());
    v = fresh;
  }
  return copy;
}

Var layer_forward(LayerInstance& layer, const Var& x, ForwardContext& ctx) {
  return layer.forward(x, ctx);
}

Network::Network(std::vector<LayerInstance> layers, Shape input_shape)
    : layers_(std::move(layers)), input_shape_(std::move(input_shape)) {}

bool Network::uses_labels() const noexcept {
  return std::any_of(layers_.begin(), layers_.end(),
                     [](const LayerInstance& l) { return l.uses_labels(); });
}

Var Network::forward(const Var& x, ForwardContext& ctx) {
  Var h = x;
  for (auto& layer : layers_) h = layer.forward(h, ctx);
  return h;
}

std::vector<Var> Network::parameters() const {
  std::vector<Var> out;
  for (const auto& layer : layers_) {
    for (const auto& [name, v] : layer.parameters()) out.push_back(v);
  }
  return out;
}

void Network::set_requires_grad(bool on) {
  for (auto p : parameters()) p.set_requires_grad(on);
}

void Network::zero_grad() {
  for (auto p : parameters()) p.zero_grad();
}

Network Network::clone() const {
  Network copy;
  copy.input_shape_ = input_shape_;
  for (const auto& layer : layers_) copy.layers_.push_back(layer.clone());
  return copy;
}

Network build_network(const std::vector<LayerSpec>& specs, const Shape& input_shape,
                      RngStream& rng, const BuildContext& ctx) {
  std::vector<LayerInstance> layers;
  Shape shape = input_shape;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    try {
      layers.push_back(build_layer(specs[i], shape, rng, ctx));
    } catch (const ParamError& e) {
      throw LayerError(i, e.key(), "layer " + std::to_string(i) + " (" + specs[i].kind +
                                       "): " + e.what());
    } catch (const Error& e) {
      throw LayerError(i, "", "layer " + std::to_string(i) + " (" + specs[i].kind +
                                  "): " + e.what());
    }
    shape = layers.back().output_shape();
  }
  return Network(std::move(layers), input_shape);
}

}  // namespace authorgan
