#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "authorgan/autograd.hpp"
#include "authorgan/error.hpp"
#include "authorgan/rng.hpp"
#include "authorgan/tensor.hpp"

namespace authorgan {

enum class LayerCategory {
  convolutional,
  recurrent,
  core,
  activation,
  loss,
  optimization,
  normalization,
};

std::string_view category_name(LayerCategory c);

enum class ParamType { integer, number, boolean, string, shape };

std::string_view param_type_name(ParamType t);

using ParamValue = std::variant<std::int64_t, double, bool, std::string, std::vector<std::int64_t>>;
using ParamMap = std::map<std::string, ParamValue>;

std::string describe(const ParamValue& v);

struct ParamConstraint {
  std::optional<double> min;
  std::optional<double> max;
  bool exclusive_min = false;
  bool exclusive_max = false;
  std::vector<std::string> one_of;

  /// Human-readable form, e.g. ">= 1" or "in [0, 1)". Empty if unconstrained.
  std::string describe() const;
};

struct ParamSchema {
  std::string name;
  ParamType type;
  /// nullopt marks a required parameter.
  std::optional<ParamValue> default_value;
  ParamConstraint constraint;
};

struct PaletteEntry {
  std::string kind;
  LayerCategory category;
  std::string display_name;
  std::vector<ParamSchema> params;
  std::string description;

  /// Loss and optimizer entries configure training rather than forming layers.
  bool is_graph_layer() const noexcept {
    return category != LayerCategory::loss && category != LayerCategory::optimization;
  }
  /// Recurrent kinds pass shape inference but cannot execute.
  bool is_executable() const noexcept { return category != LayerCategory::recurrent; }
};

/// All authorable kinds: 31 entries over 7 categories, sorted by category (in
/// enum order) and then by kind name. Immutable; safe to share across threads.
const std::vector<PaletteEntry>& palette();
const PaletteEntry* find_palette_entry(std::string_view kind);

struct LayerSpec {
  std::string kind;
  ParamMap params;

  bool operator==(const LayerSpec&) const = default;
};

struct ParamIssue {
  std::string key;  // empty when the issue concerns the kind itself
  std::string message;
};

/// Schema check of a spec's params against its palette entry: unknown keys,
/// missing required keys, wrong types and constraint violations.
std::vector<ParamIssue> check_params(const LayerSpec& spec);

/// Spec with every schema default filled in. Throws ParamError naming the first
/// offending key when check_params reports anything.
LayerSpec with_defaults(const LayerSpec& spec);

std::int64_t get_int(const LayerSpec& spec, const std::string& key);
double get_number(const LayerSpec& spec, const std::string& key);
bool get_bool(const LayerSpec& spec, const std::string& key);
const std::string& get_string(const LayerSpec& spec, const std::string& key);
Shape get_shape(const LayerSpec& spec, const std::string& key);

enum class ParamInit { dense_weight, conv_weight, bias, norm_scale, norm_shift };

/// Initial values: dense weights Glorot-normal with std sqrt(2/(fan_in+fan_out)),
/// convolution weights N(0, 0.02), biases and normalization shifts 0,
/// normalization scales N(1, 0.02).
Tensor init_params(ParamInit kind, const Shape& shape, std::size_t fan_in, std::size_t fan_out,
                   RngStream& rng);

enum class Mode { train, eval };

struct ForwardContext {
  Mode mode = Mode::train;
  /// Dropout masks; may be null in eval mode.
  RngStream* rng = nullptr;
  /// One-hot labels [N, label_count] for Concatenate layers.
  Var labels;
};

struct BuildContext {
  /// Width of the one-hot label block appended by Concatenate.
  std::size_t label_count = 10;
};

/// A configured layer with its trainable parameters. Shapes exclude the batch
/// axis. Copying shares parameter storage; use clone() for an independent copy.
class LayerInstance {
 public:
  const LayerSpec& spec() const noexcept { return spec_; }
  const PaletteEntry& entry() const noexcept { return *entry_; }
  const Shape& input_shape() const noexcept { return input_shape_; }
  const Shape& output_shape() const noexcept { return output_shape_; }
  const std::vector<std::pair<std::string, Var>>& parameters() const noexcept {
    return params_;
  }
  /// Non-trainable state such as BatchNorm running statistics.
  const std::map<std::string, Tensor>& buffers() const noexcept { return buffers_; }
  bool uses_labels() const noexcept { return spec_.kind == "Concatenate"; }

  Var forward(const Var& x, ForwardContext& ctx);
  LayerInstance clone() const;

 private:
  friend LayerInstance build_layer(const LayerSpec&, const Shape&, RngStream&,
                                   const BuildContext&);
  LayerSpec spec_;
  const PaletteEntry* entry_ = nullptr;
  Shape input_shape_;
  Shape output_shape_;
  std::vector<std::pair<std::string, Var>> params_;
  std::map<std::string, Tensor> buffers_;
};

/// Validates `spec`, infers the output shape for `input_shape` and initializes
/// parameters. Throws ParamError on schema violations, ShapeError on
/// incompatible input rank or extents, ContractError for loss/optimizer kinds.
LayerInstance build_layer(const LayerSpec& spec, const Shape& input_shape, RngStream& rng,
                          const BuildContext& ctx = {});

/// Runs one layer on a batch; x is [N, input_shape...].
Var layer_forward(LayerInstance& layer, const Var& x, ForwardContext& ctx);

/// Ordered stack of layers with end-to-end inferred shapes.
class Network {
 public:
  Network() = default;
  Network(std::vector<LayerInstance> layers, Shape input_shape);

  const std::vector<LayerInstance>& layers() const noexcept { return layers_; }
  std::vector<LayerInstance>& layers() noexcept { return layers_; }
  const Shape& input_shape() const noexcept { return input_shape_; }
  const Shape& output_shape() const noexcept {
    return layers_.empty() ? input_shape_ : layers_.back().output_shape();
  }
  bool uses_labels() const noexcept;

  Var forward(const Var& x, ForwardContext& ctx);
  std::vector<Var> parameters() const;
  void set_requires_grad(bool on);
  void zero_grad();
  Network clone() const;

 private:
  std::vector<LayerInstance> layers_;
  Shape input_shape_;
};

/// Raised by build_network; wraps the first failing layer's error.
class LayerError : public Error {
 public:
  LayerError(std::size_t index, std::string param_key, const std::string& message)
      : Error(message), index_(index), param_key_(std::move(param_key)) {}
  std::size_t index() const noexcept { return index_; }
  /// Offending parameter for schema errors, otherwise empty.
  const std::string& param_key() const noexcept { return param_key_; }

 private:
  std::size_t index_;
  std::string param_key_;
};

/// Builds every layer in order, threading shapes.
Network build_network(const std::vector<LayerSpec>& specs, const Shape& input_shape,
                      RngStream& rng, const BuildContext& ctx = {});

}  // namespace authorgan
