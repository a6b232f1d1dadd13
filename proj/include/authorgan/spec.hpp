#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "authorgan/error.hpp"
#include "authorgan/layers.hpp"
#include "authorgan/models.hpp"

namespace authorgan {

struct Diagnostic {
  enum class Severity { error, warning };

  Severity severity = Severity::error;
  /// JSON pointer into the document, "" for the whole document.
  std::string path;
  std::string message;
  /// Set for JSON syntax errors only (1-based).
  std::optional<std::size_t> line;
  std::optional<std::size_t> column;

  bool is_error() const noexcept { return severity == Severity::error; }
};

std::size_t error_count(const std::vector<Diagnostic>& diagnostics);

/// One side of the GAN: a preset name or an explicit layer list, plus optional
/// optimizer and loss overrides in palette form.
struct NetworkSpec {
  std::optional<std::string> choice;
  std::optional<std::vector<LayerSpec>> layers;
  std::optional<LayerSpec> optimizer;
  std::optional<LayerSpec> loss;

  bool operator==(const NetworkSpec&) const = default;
};

struct ProcessSpec {
  /// Empty keeps the process selected by the pairing rule.
  std::optional<std::string> choice;
  /// n_critic, clip_value, gp_lambda, label_count.
  std::map<std::string, double> params;

  bool operator==(const ProcessSpec&) const = default;
};

struct GanModelSettings {
  std::int64_t epochs = 10;
  std::int64_t batch_size = 64;
  std::uint64_t seed = 0;
  std::int64_t latent_dim = 100;
  /// Replaces lr in both optimizers unless a network's optimizer sets lr itself.
  std::optional<double> learning_rate;

  bool operator==(const GanModelSettings&) const = default;
};

struct GanSpec {
  std::string spec_version = "1";
  GanModelSettings gan_model;
  NetworkSpec generator;
  NetworkSpec discriminator;
  std::optional<ProcessSpec> train_process;
  std::string data_path;
  std::optional<std::string> labels_path;

  bool operator==(const GanSpec&) const = default;
};

struct ParseResult {
  std::optional<GanSpec> spec;
  std::vector<Diagnostic> diagnostics;

  bool ok() const noexcept { return spec.has_value(); }
};

/// Structural parse. Unknown keys, wrong types and missing required fields are
/// reported as error diagnostics (and no spec is returned); malformed JSON gives
/// exactly one diagnostic with line and column. Numbers may be written as
/// numeric strings. "GAN_model" is also accepted as "gan_model".
ParseResult parse_spec(std::string_view text);

/// Semantic checks: preset names, layer parameters against the palette,
/// optimizer/loss kinds, data format, value ranges. Errors block resolution;
/// warnings (e.g. non-executable recurrent layers) do not.
std::vector<Diagnostic> validate(const GanSpec& spec);

/// parse_spec followed by validate when parsing succeeded.
std::vector<Diagnostic> check_spec(std::string_view text);

/// Canonical JSON text; parse_spec(serialize_spec(s)).spec == s.
std::string serialize_spec(const GanSpec& spec, int indent = 2);

std::string diagnostics_json(const std::vector<Diagnostic>& diagnostics);

/// Raised by resolve; carries the diagnostics that prevented resolution.
class ResolveError : public Error {
 public:
  explicit ResolveError(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

/// Expands presets, builds both networks for data_shape ([C,H,W] or [D]) and
/// binds losses, optimizers and the training process.
///
/// Pairing rule: the discriminator's preset family supplies the loss pair, both
/// optimizers and the process; a custom discriminator defers to the generator's
/// family, and two custom networks use the gan defaults. Explicit loss,
/// optimizer and train_process fields override per network.
ResolvedModel resolve(const GanSpec& spec, const Shape& data_shape);

/// JSON Schema (draft 2020-12) describing spec documents.
const std::string& spec_schema_json();

}  // namespace authorgan
