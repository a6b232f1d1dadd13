#include "authorgan/spec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace authorgan {

using nlohmann::json;

std::size_t error_count(const std::vector<Diagnostic>& diagnostics) {
  return static_cast<std::size_t>(std::count_if(
      diagnostics.begin(), diagnostics.end(), [](const Diagnostic& d) { return d.is_error(); }));
}

ResolveError::ResolveError(std::vector<Diagnostic> diagnostics)
    : Error(diagnostics.empty() ? std::string("resolve failed")
                                : diagnostics.front().path + ": " + diagnostics.front().message),
      diagnostics_(std::move(diagnostics)) {}

namespace {

const char* kProcessParams[] = {"n_critic", "clip_value", "gp_lambda", "label_count"};

std::string list_names(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

std::string type_name(const json& v) {
  if (v.is_string()) return "a string";
  if (v.is_boolean()) return "a boolean";
  if (v.is_number()) return "a number";
  if (v.is_array()) return "an array";
  if (v.is_object()) return "an object";
  return "null";
}

std::optional<double> parse_number_text(const std::string& s) {
  double v = 0;
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && e[-1] == ' ') --e;
  if (b < e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || b == e) return std::nullopt;
  return v;
}

// JSON number or numeric string.
std::optional<double> as_number(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_number_text(v.get<std::string>());
  return std::nullopt;
}

std::optional<std::int64_t> as_integer(const json& v) {
  if (v.is_number_integer()) {
    if (v.is_number_unsigned() &&
        v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      return std::nullopt;
    }
    return v.get<std::int64_t>();
  }
  auto d = as_number(v);
  if (!d || !std::isfinite(*d) || std::floor(*d) != *d || std::abs(*d) > 9.0e15) return std::nullopt;
  return static_cast<std::int64_t>(*d);
}

class Parser {
 public:
  std::vector<Diagnostic> diags;

  void error(std::string path, std::string message) {
    diags.push_back({Diagnostic::Severity::error, std::move(path), std::move(message), {}, {}});
  }

  void unknown_keys(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : obj.items()) {
      bool ok = std::any_of(allowed.begin(), allowed.end(),
                            [&](const char* a) { return key == a; });
      if (!ok) {
        std::string names;
        for (const char* a : allowed) names += (names.empty() ? "" : ", ") + std::string(a);
        error(path + "/" + key, "unknown key '" + key + "' (allowed: " + names + ")");
      }
    }
  }

  std::optional<ParamValue> param_value(const json& v, const ParamSchema* schema,
                                        const std::string& path) {
    const bool numeric = schema && (schema->type == ParamType::integer ||
                                    schema->type == ParamType::number);
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number_integer()) {
      if (auto i = as_integer(v)) return *i;
      error(path, "integer out of range");
      return std::nullopt;
    }
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      if (numeric) {
        if (auto d = as_number(v)) {
          if (schema->type == ParamType::integer) {
            if (auto i = as_integer(v)) return *i;
          }
          return *d;
        }
      }
      return v.get<std::string>();
    }
    if (v.is_array()) {
      std::vector<std::int64_t> extents;
      for (std::size_t i = 0; i < v.size(); ++i) {
        auto e = as_integer(v[i]);
        if (!e) {
          error(path + "/" + std::to_string(i), "shape extents must be integers");
          return std::nullopt;
        }
        extents.push_back(*e);
      }
      return extents;
    }
    error(path, "unsupported parameter value (" + type_name(v) + ")");
    return std::nullopt;
  }

  // {"kind": K, "params": {...}} or a bare kind string.
  std::optional<LayerSpec> layer_spec(const json& v, const std::string& path) {
    if (v.is_string()) return LayerSpec{v.get<std::string>(), {}};
    if (!v.is_object()) {
      error(path, "expected an object with 'kind' and optional 'params', got " + type_name(v));
      return std::nullopt;
    }
    unknown_keys(v, path, {"kind", "params"});
    if (!v.contains("kind") || !v["kind"].is_string()) {
      error(path + "/kind", "missing layer kind (a palette name such as \"Dense\")");
      return std::nullopt;
    }
    LayerSpec spec{v["kind"].get<std::string>(), {}};
    const PaletteEntry* entry = find_palette_entry(spec.kind);
    if (v.contains("params")) {
      const json& params = v["params"];
      if (!params.is_object()) {
        error(path + "/params", "expected an object, got " + type_name(params));
        return std::nullopt;
      }
      bool ok = true;
      for (const auto& [key, value] : params.items()) {
        const ParamSchema* schema = nullptr;
        if (entry) {
          for (const auto& s : entry->params) {
            if (s.name == key) schema = &s;
          }
        }
        auto pv = param_value(value, schema, path + "/params/" + key);
        if (pv) {
          spec.params[key] = *pv;
        } else {
          ok = false;
        }
      }
      if (!ok) return std::nullopt;
    }
    return spec;
  }

  std::optional<NetworkSpec> network(const json& root, const char* key) {
    const std::string path = std::string("/") + key;
    if (!root.contains(key)) {
      error(path, std::string("missing ") + key + " (give \"choice\" or \"layers\")");
      return std::nullopt;
    }
    const json& v = root[key];
    if (!v.is_object()) {
      error(path, "expected an object, got " + type_name(v));
      return std::nullopt;
    }
    unknown_keys(v, path, {"choice", "layers", "optimizer", "loss"});
    const std::size_t before = diags.size();
    NetworkSpec net;
    const bool has_choice = v.contains("choice");
    const bool has_layers = v.contains("layers");
    if (has_choice && has_layers) {
      error(path, "give either \"choice\" or \"layers\", not both");
    } else if (!has_choice && !has_layers) {
      error(path, "needs \"choice\" (a preset name) or \"layers\"");
    }
    if (has_choice) {
      if (v["choice"].is_string()) {
        net.choice = v["choice"].get<std::string>();
      } else {
        error(path + "/choice", "expected a preset name, got " + type_name(v["choice"]));
      }
    }
    if (has_layers) {
      const json& layers = v["layers"];
      if (!layers.is_array()) {
        error(path + "/layers", "expected an array, got " + type_name(layers));
      } else {
        net.layers.emplace();
        for (std::size_t i = 0; i < layers.size(); ++i) {
          if (auto l = layer_spec(layers[i], path + "/layers/" + std::to_string(i))) {
            net.layers->push_back(std::move(*l));
          }
        }
      }
    }
    for (const char* sub : {"optimizer", "loss"}) {
      if (!v.contains(sub)) continue;
      auto l = layer_spec(v[sub], path + "/" + sub);
      if (!l) continue;
      (std::string(sub) == "optimizer" ? net.optimizer : net.loss) = std::move(*l);
    }
    if (diags.size() != before) return std::nullopt;
    return net;
  }

  void settings(const json& v, const std::string& path, GanModelSettings& out) {
    if (!v.is_object()) {
      error(path, "expected an object, got " + type_name(v));
      return;
    }
    unknown_keys(v, path, {"epochs", "batch_size", "seed", "latent_dim", "learning_rate"});
    auto integer = [&](const char* key, std::int64_t& dst) {
      if (!v.contains(key)) return;
      if (auto i = as_integer(v[key])) {
        dst = *i;
      } else {
        error(path + "/" + key, std::string(key) + " must be an integer, got " +
                                    type_name(v[key]));
      }
    };
    integer("epochs", out.epochs);
    integer("batch_size", out.batch_size);
    integer("latent_dim", out.latent_dim);
    if (v.contains("seed")) {
      const json& s = v["seed"];
      if (s.is_number_unsigned()) {
        out.seed = s.get<std::uint64_t>();
      } else if (auto i = as_integer(s); i && *i >= 0) {
        out.seed = static_cast<std::uint64_t>(*i);
      } else if (s.is_string() && !s.get<std::string>().empty() &&
                 s.get<std::string>().find_first_not_of("0123456789") == std::string::npos) {
        const std::string& t = s.get_ref<const std::string&>();
        std::uint64_t u = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), u);
        if (ec == std::errc() && p == t.data() + t.size()) {
          out.seed = u;
        } else {
          error(path + "/seed", "seed must be an unsigned 64-bit integer");
        }
      } else {
        error(path + "/seed", "seed must be an unsigned 64-bit integer");
      }
    }
    if (v.contains("learning_rate")) {
      if (auto d = as_number(v["learning_rate"])) {
        out.learning_rate = *d;
      } else {
        error(path + "/learning_rate", "learning_rate must be a number, got " +
                                           type_name(v["learning_rate"]));
      }
    }
  }

  void process(const json& v, std::optional<ProcessSpec>& out) {
    const std::string path = "/train_process";
    if (!v.is_object()) {
      error(path, "expected an object, got " + type_name(v));
      return;
    }
    unknown_keys(v, path, {"choice", "params"});
    ProcessSpec p;
    if (v.contains("choice")) {
      if (v["choice"].is_string()) {
        p.choice = v["choice"].get<std::string>();
      } else {
        error(path + "/choice", "expected a process name, got " + type_name(v["choice"]));
      }
    }
    if (v.contains("params")) {
      const json& params = v["params"];
      if (!params.is_object()) {
        error(path + "/params", "expected an object, got " + type_name(params));
      } else {
        for (const auto& [key, value] : params.items()) {
          const bool known = std::any_of(std::begin(kProcessParams), std::end(kProcessParams),
                                         [&](const char* k) { return key == k; });
          if (!known) {
            error(path + "/params/" + key,
                  "unknown process parameter '" + key +
                      "' (allowed: n_critic, clip_value, gp_lambda, label_count)");
          } else if (auto d = as_number(value)) {
            p.params[key] = *d;
          } else {
            error(path + "/params/" + key, key + " must be a number, got " + type_name(value));
          }
        }
      }
    }
    out = std::move(p);
  }

  std::optional<GanSpec> document(const json& root) {
    if (!root.is_object()) {
      error("", "a spec must be a JSON object, got " + type_name(root));
      return std::nullopt;
    }
    unknown_keys(root, "", {"GAN_model", "gan_model", "generator", "discriminator",
                            "train_process", "data_path", "labels_path", "spec_version"});
    GanSpec spec;
    if (root.contains("GAN_model") && root.contains("gan_model")) {
      error("/gan_model", "give GAN_model once (gan_model is an alias)");
    }
    for (const char* key : {"GAN_model", "gan_model"}) {
      if (root.contains(key)) settings(root[key], std::string("/") + key, spec.gan_model);
    }
    auto gen = network(root, "generator");
    auto disc = network(root, "discriminator");
    if (gen) spec.generator = std::move(*gen);
    if (disc) spec.discriminator = std::move(*disc);
    if (root.contains("train_process")) process(root["train_process"], spec.train_process);
    if (!root.contains("data_path")) {
      error("/data_path", "missing data_path (IDX, GFD1 or .pkl path)");
    } else if (!root["data_path"].is_string()) {
      error("/data_path", "expected a path string, got " + type_name(root["data_path"]));
    } else {
      spec.data_path = root["data_path"].get<std::string>();
    }
    if (root.contains("labels_path")) {
      if (root["labels_path"].is_string()) {
        spec.labels_path = root["labels_path"].get<std::string>();
      } else {
        error("/labels_path", "expected a path string, got " + type_name(root["labels_path"]));
      }
    }
    if (root.contains("spec_version")) {
      const json& sv = root["spec_version"];
      if (sv.is_string()) {
        spec.spec_version = sv.get<std::string>();
      } else if (sv.is_number_integer()) {
        spec.spec_version = std::to_string(sv.get<std::int64_t>());
      } else {
        error("/spec_version", "expected a version string, got " + type_name(sv));
      }
    }
    if (error_count(diags) > 0) return std::nullopt;
    return spec;
  }
};

Diagnostic syntax_error(std::string_view text, std::size_t byte, const std::string& what) {
  // byte is the 1-based offset of the last character read
  const std::size_t end = std::min(byte == 0 ? 0 : byte - 1, text.size());
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  std::string reason = what;
  if (auto pos = what.find("column"); pos != std::string::npos) {
    if (auto colon = what.find(": ", pos); colon != std::string::npos) reason = what.substr(colon + 2);
  }
  Diagnostic d{Diagnostic::Severity::error, "",
               "invalid JSON at line " + std::to_string(line) + ", column " +
                   std::to_string(column) + ": " + reason,
               line, column};
  return d;
}

}  // namespace

ParseResult parse_spec(std::string_view text) {
  ParseResult result;
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    result.diagnostics.push_back(syntax_error(text, e.byte, e.what()));
    return result;
  }
  Parser p;
  result.spec = p.document(root);
  result.diagnostics = std::move(p.diags);
  return result;
}

// --- validation --------------------------------------------------------------

namespace {

bool supported_data_path(const std::string& path, std::string& ext_out) {
  std::filesystem::path p(path);
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  ext_out = ext;
  if (ext.empty() || ext == ".idx" || ext == ".gfd" || ext == ".pkl" || ext == ".ubyte") {
    return true;
  }
  // MNIST distribution names such as train-images.idx3-ubyte
  const std::string name = p.filename().string();
  return name.find("idx") != std::string::npos || name.find("ubyte") != std::string::npos;
}

void check_layer_list(const std::vector<LayerSpec>& layers, const std::string& path,
                      std::vector<Diagnostic>& out) {
  if (layers.empty()) {
    out.push_back({Diagnostic::Severity::error, path, "layer list is empty", {}, {}});
    return;
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string lp = path + "/" + std::to_string(i);
    const PaletteEntry* entry = find_palette_entry(l.kind);
    if (!entry) {
      out.push_back({Diagnostic::Severity::error, lp + "/kind",
                     "unknown layer kind '" + l.kind + "' (see the palette)", {}, {}});
      continue;
    }
    if (!entry->is_graph_layer()) {
      out.push_back({Diagnostic::Severity::error, lp + "/kind",
                     l.kind + " is a " + std::string(category_name(entry->category)) +
                         " entry; set it as the network's " +
                         (entry->category == LayerCategory::loss ? "loss" : "optimizer") +
                         " instead of a layer",
                     {}, {}});
      continue;
    }
    for (const auto& issue : check_params(l)) {
      out.push_back({Diagnostic::Severity::error,
                     issue.key.empty() ? lp : lp + "/params/" + issue.key, issue.message, {}, {}});
    }
    if (!entry->is_executable()) {
      out.push_back({Diagnostic::Severity::warning, lp + "/kind",
                     "unsupported kind: " + l.kind + " passes shape checks but cannot be trained",
                     {}, {}});
    }
  }
}

void check_config_entry(const LayerSpec& spec, LayerCategory category, const std::string& path,
                        std::vector<Diagnostic>& out) {
  const PaletteEntry* entry = find_palette_entry(spec.kind);
  const char* what = category == LayerCategory::loss ? "loss" : "optimizer";
  if (!entry || entry->category != category) {
    std::vector<std::string> kinds;
    for (const auto& e : palette()) {
      if (e.category == category) kinds.push_back(e.kind);
    }
    out.push_back({Diagnostic::Severity::error, path + "/kind",
                   "'" + spec.kind + "' is not a " + what + " (valid: " + list_names(kinds) + ")",
                   {}, {}});
    return;
  }
  for (const auto& issue : check_params(spec)) {
    out.push_back({Diagnostic::Severity::error,
                   issue.key.empty() ? path : path + "/params/" + issue.key, issue.message, {}, {}});
  }
}

void check_network(const NetworkSpec& net, const std::string& path,
                   std::vector<Diagnostic>& out) {
  if (net.choice && !is_preset(*net.choice)) {
    out.push_back({Diagnostic::Severity::error, path + "/choice",
                   "unknown preset '" + *net.choice + "' (valid: " + list_names(preset_names()) +
                       ")",
                   {}, {}});
  }
  if (net.layers) check_layer_list(*net.layers, path + "/layers", out);
  if (net.optimizer) check_config_entry(*net.optimizer, LayerCategory::optimization,
                                        path + "/optimizer", out);
  if (net.loss) check_config_entry(*net.loss, LayerCategory::loss, path + "/loss", out);
}

void check_process(const ProcessSpec& p, std::vector<Diagnostic>& out) {
  const std::string path = "/train_process";
  if (p.choice && !process_from_name(*p.choice)) {
    out.push_back({Diagnostic::Severity::error, path + "/choice",
                   "unknown training process '" + *p.choice +
                       "' (valid: standard, wgan_clip, wgan_gp, conditional)",
                   {}, {}});
  }
  auto bad = [&](const std::string& key, const std::string& msg) {
    out.push_back({Diagnostic::Severity::error, path + "/params/" + key, msg, {}, {}});
  };
  for (const auto& [key, v] : p.params) {
    const bool integral = std::isfinite(v) && std::floor(v) == v;
    if (!std::isfinite(v)) {
      bad(key, key + " must be finite");
    } else if (key == "n_critic" && (!integral || v < 1 || v > 1000)) {
      bad(key, "n_critic must be an integer in [1, 1000]");
    } else if (key == "clip_value" && !(v > 0)) {
      bad(key, "clip_value must be > 0");
    } else if (key == "gp_lambda" && !(v >= 0)) {
      bad(key, "gp_lambda must be >= 0");
    } else if (key == "label_count" && (!integral || v < 1 || v > 100000)) {
      bad(key, "label_count must be an integer in [1, 100000]");
    }
  }
}

}  // namespace

std::vector<Diagnostic> validate(const GanSpec& spec) {
  std::vector<Diagnostic> out;
  auto err = [&](std::string path, std::string msg) {
    out.push_back({Diagnostic::Severity::error, std::move(path), std::move(msg), {}, {}});
  };
  if (spec.spec_version != "1") {
    err("/spec_version", "unsupported spec_version '" + spec.spec_version + "' (supported: 1)");
  }
  const auto& m = spec.gan_model;
  if (m.epochs < 1) err("/GAN_model/epochs", "epochs must be >= 1");
  if (m.batch_size < 1) err("/GAN_model/batch_size", "batch_size must be >= 1");
  if (m.latent_dim < 1) err("/GAN_model/latent_dim", "latent_dim must be >= 1");
  if (m.learning_rate && !(*m.learning_rate > 0 && std::isfinite(*m.learning_rate))) {
    err("/GAN_model/learning_rate", "learning_rate must be > 0");
  }
  check_network(spec.generator, "/generator", out);
  check_network(spec.discriminator, "/discriminator", out);
  if (spec.train_process) check_process(*spec.train_process, out);
  std::string ext;
  if (spec.data_path.empty()) {
    err("/data_path", "data_path is empty");
  } else if (!supported_data_path(spec.data_path, ext)) {
    err("/data_path", "unsupported data format '" + ext +
                          "' (supported: IDX .idx/*-ubyte, GFD1 .gfd, .pkl after conversion "
                          "with tools/convert_dataset.py)");
  }
  if (spec.labels_path && spec.labels_path->empty()) err("/labels_path", "labels_path is empty");
  return out;
}

std::vector<Diagnostic> check_spec(std::string_view text) {
  ParseResult r = parse_spec(text);
  if (!r.ok()) return r.diagnostics;
  auto more = validate(*r.spec);
  r.diagnostics.insert(r.diagnostics.end(), more.begin(), more.end());
  return r.diagnostics;
}

// --- serialization -----------------------------------------------------------

namespace {

json param_json(const ParamValue& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

json layer_json(const LayerSpec& l) {
  json j = {{"kind", l.kind}};
  if (!l.params.empty()) {
    json p = json::object();
    for (const auto& [k, v] : l.params) p[k] = param_json(v);
    j["params"] = std::move(p);
  }
  return j;
}

json network_json(const NetworkSpec& n) {
  json j = json::object();
  if (n.choice) j["choice"] = *n.choice;
  if (n.layers) {
    json arr = json::array();
    for (const auto& l : *n.layers) arr.push_back(layer_json(l));
    j["layers"] = std::move(arr);
  }
  if (n.optimizer) j["optimizer"] = layer_json(*n.optimizer);
  if (n.loss) j["loss"] = layer_json(*n.loss);
  return j;
}

}  // namespace

std::string serialize_spec(const GanSpec& spec, int indent) {
  json j = json::object();
  json m = {{"epochs", spec.gan_model.epochs},
            {"batch_size", spec.gan_model.batch_size},
            {"seed", spec.gan_model.seed},
            {"latent_dim", spec.gan_model.latent_dim}};
  if (spec.gan_model.learning_rate) m["learning_rate"] = *spec.gan_model.learning_rate;
  j["spec_version"] = spec.spec_version;
  j["GAN_model"] = std::move(m);
  j["generator"] = network_json(spec.generator);
  j["discriminator"] = network_json(spec.discriminator);
  if (spec.train_process) {
    json p = json::object();
    if (spec.train_process->choice) p["choice"] = *spec.train_process->choice;
    if (!spec.train_process->params.empty()) p["params"] = spec.train_process->params;
    j["train_process"] = std::move(p);
  }
  j["data_path"] = spec.data_path;
  if (spec.labels_path) j["labels_path"] = *spec.labels_path;
  return j.dump(indent);
}

std::string diagnostics_json(const std::vector<Diagnostic>& diagnostics) {
  json arr = json::array();
  for (const auto& d : diagnostics) {
    json j = {{"severity", d.is_error() ? "error" : "warning"},
              {"path", d.path},
              {"message", d.message}};
    if (d.line) j["line"] = *d.line;
    if (d.column) j["column"] = *d.column;
    arr.push_back(std::move(j));
  }
  return arr.dump();
}

// --- resolution --------------------------------------------------------------

namespace {

std::string governing_family(const GanSpec& spec) {
  if (spec.discriminator.choice) return *spec.discriminator.choice;
  if (spec.generator.choice) return *spec.generator.choice;
  return "gan";
}

std::string pairing_source(const GanSpec& spec) {
  if (spec.discriminator.choice) return "discriminator family " + *spec.discriminator.choice;
  if (spec.generator.choice) return "generator family " + *spec.generator.choice;
  return "gan defaults (both networks custom)";
}

OptimizerConfig bind_optimizer(const NetworkSpec& net, const OptimizerConfig& fallback,
                               const GanModelSettings& settings) {
  OptimizerConfig c = net.optimizer ? optimizer_from_spec(*net.optimizer) : fallback;
  const bool explicit_lr = net.optimizer && net.optimizer->params.count("lr") > 0;
  if (settings.learning_rate && !explicit_lr) c.lr = *settings.learning_rate;
  return c;
}

Network build_side(const NetworkSpec& net, const std::vector<LayerSpec>& specs,
                   const Shape& input, RngStream& rng, const BuildContext& ctx,
                   const std::string& path) {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const PaletteEntry* e = find_palette_entry(specs[i].kind);
    if (e && !e->is_executable()) {
      const std::string where = net.layers ? path + "/layers/" + std::to_string(i) : path + "/choice";
      throw ResolveError({{Diagnostic::Severity::error, where + "/kind",
                           "unsupported kind: " + specs[i].kind + " cannot be executed", {}, {}}});
    }
  }
  try {
    return build_network(specs, input, rng, ctx);
  } catch (const LayerError& e) {
    std::string where = net.layers ? path + "/layers/" + std::to_string(e.index()) : path + "/choice";
    if (net.layers && !e.param_key().empty()) where += "/params/" + e.param_key();
    throw ResolveError({{Diagnostic::Severity::error, where, e.what(), {}, {}}});
  }
}

}  // namespace

ResolvedModel resolve(const GanSpec& spec, const Shape& data_shape) {
  {
    auto diags = validate(spec);
    if (error_count(diags) > 0) {
      diags.erase(std::remove_if(diags.begin(), diags.end(),
                                 [](const Diagnostic& d) { return !d.is_error(); }),
                  diags.end());
      throw ResolveError(std::move(diags));
    }
  }
  if (data_shape.empty() || numel(data_shape) == 0) {
    throw ResolveError({{Diagnostic::Severity::error, "/data_path",
                         "dataset has an empty sample shape", {}, {}}});
  }

  const std::string family = governing_family(spec);
  const PresetDefaults defaults = preset_defaults(family);

  ResolvedModel m;
  m.generator_name = spec.generator.choice.value_or("custom");
  m.discriminator_name = spec.discriminator.choice.value_or("custom");
  m.latent_dim = static_cast<std::size_t>(spec.gan_model.latent_dim);
  m.data_shape = data_shape;
  m.seed = spec.gan_model.seed;
  m.batch_size = static_cast<std::size_t>(spec.gan_model.batch_size);

  m.process = defaults.process;
  if (spec.train_process) {
    if (spec.train_process->choice) m.process.kind = *process_from_name(*spec.train_process->choice);
    for (const auto& [key, v] : spec.train_process->params) {
      if (key == "n_critic") m.process.n_critic = static_cast<int>(v);
      if (key == "clip_value") m.process.clip_value = v;
      if (key == "gp_lambda") m.process.gp_lambda = v;
      if (key == "label_count") m.process.label_count = static_cast<std::size_t>(v);
    }
  }

  m.discriminator_loss = spec.discriminator.loss ? loss_from_kind(spec.discriminator.loss->kind)
                                                 : defaults.loss;
  m.generator_loss =
      spec.generator.loss ? loss_from_kind(spec.generator.loss->kind) : defaults.loss;
  m.generator_optimizer =
      OptimizerState(bind_optimizer(spec.generator, defaults.optimizer, spec.gan_model));
  m.discriminator_optimizer =
      OptimizerState(bind_optimizer(spec.discriminator, defaults.optimizer, spec.gan_model));

  std::vector<LayerSpec> gen_specs, disc_specs;
  try {
    gen_specs = spec.generator.layers
                    ? *spec.generator.layers
                    : preset_generator(*spec.generator.choice, m.latent_dim, data_shape);
  } catch (const Error& e) {
    throw ResolveError({{Diagnostic::Severity::error, "/generator/choice", e.what(), {}, {}}});
  }
  try {
    disc_specs = spec.discriminator.layers ? *spec.discriminator.layers
                                           : preset_discriminator(*spec.discriminator.choice,
                                                                  data_shape);
  } catch (const Error& e) {
    throw ResolveError({{Diagnostic::Severity::error, "/discriminator/choice", e.what(), {}, {}}});
  }

  BuildContext ctx;
  ctx.label_count = m.process.label_count;
  RngStream gen_rng = role_stream(m.seed, StreamRole::generator_init);
  RngStream disc_rng = role_stream(m.seed, StreamRole::discriminator_init);
  m.generator = build_side(spec.generator, gen_specs, Shape{m.latent_dim}, gen_rng, ctx,
                           "/generator");
  m.discriminator = build_side(spec.discriminator, disc_specs, data_shape, disc_rng, ctx,
                               "/discriminator");

  auto last = [](const NetworkSpec& net, std::size_t count, const std::string& path) {
    return net.layers ? path + "/layers/" + std::to_string(count - 1) : path + "/choice";
  };
  if (m.generator.output_shape() != data_shape) {
    throw ResolveError({{Diagnostic::Severity::error,
                         last(spec.generator, gen_specs.size(), "/generator"),
                         "generator produces " + to_string(m.generator.output_shape()) +
                             " but the data has shape " + to_string(data_shape),
                         {}, {}}});
  }
  if (m.discriminator.output_shape() != Shape{1}) {
    throw ResolveError({{Diagnostic::Severity::error,
                         last(spec.discriminator, disc_specs.size(), "/discriminator"),
                         "discriminator must output one score per sample, got " +
                             to_string(m.discriminator.output_shape()),
                         {}, {}}});
  }
  if (m.generator.uses_labels() || m.discriminator.uses_labels() ||
      m.process.kind == ProcessKind::conditional) {
    m.label_count = m.process.label_count;
  }

  m.pairing = pairing_source(spec) + ": loss " +
              std::string(loss_palette_kind(m.discriminator_loss)) + ", process " +
              std::string(process_name(m.process.kind));
  return m;
}

// --- schema ------------------------------------------------------------------

namespace {

json layer_schema(const char* description) {
  return {{"description", description},
          {"oneOf",
           json::array({{{"type", "string"}},
                        {{"type", "object"},
                         {"required", {"kind"}},
                         {"additionalProperties", false},
                         {"properties",
                          {{"kind", {{"type", "string"}}},
                           {"params", {{"type", "object"}}}}}}})}};
}

json numberish() {
  return {{"oneOf", json::array({{{"type", "number"}},
                                 {{"type", "string"}, {"pattern", "^\\s*[+-]?[0-9.eE+-]+\\s*$"}}})}};
}

json network_schema() {
  std::vector<std::string> names = preset_names();
  json layers = layer_schema("Graph layer from the palette");
  return {{"type", "object"},
          {"additionalProperties", false},
          {"oneOf", json::array({{{"required", {"choice"}}}, {{"required", {"layers"}}}})},
          {"properties",
           {{"choice", {{"enum", names}}},
            {"layers", {{"type", "array"}, {"minItems", 1}, {"items", layers}}},
            {"optimizer", layer_schema("Adam, RMSProp or SGD")},
            {"loss", layer_schema("BCE, MSE, L1 or Wasserstein")}}}};
}

}  // namespace

const std::string& spec_schema_json() {
  static const std::string doc = [] {
    json settings = {{"type", "object"},
                     {"additionalProperties", false},
                     {"properties",
                      {{"epochs", numberish()},
                       {"batch_size", numberish()},
                       {"seed", numberish()},
                       {"latent_dim", numberish()},
                       {"learning_rate", numberish()}}}};
    json process = {
        {"type", "object"},
        {"additionalProperties", false},
        {"properties",
         {{"choice", {{"enum", {"standard", "wgan_clip", "wgan_gp", "conditional"}}}},
          {"params",
           {{"type", "object"},
            {"additionalProperties", false},
            {"properties",
             {{"n_critic", numberish()},
              {"clip_value", numberish()},
              {"gp_lambda", numberish()},
              {"label_count", numberish()}}}}}}}};
    json schema = {
        {"$schema", "https://json-schema.org/draft/2020-12/schema"},
        {"$id", "authorgan/spec/1"},
        {"title", "GAN specification"},
        {"type", "object"},
        {"additionalProperties", false},
        {"required", {"generator", "discriminator", "data_path"}},
        {"defaults",
         {{"epochs", 10}, {"batch_size", 64}, {"seed", 0}, {"latent_dim", 100},
          {"spec_version", "1"}}},
        {"properties",
         {{"spec_version", {{"enum", {"1"}}}},
          {"GAN_model", settings},
          {"gan_model", settings},
          {"generator", network_schema()},
          {"discriminator", network_schema()},
          {"train_process", process},
          {"data_path", {{"type", "string"}, {"minLength", 1}}},
          {"labels_path", {{"type", "string"}, {"minLength", 1}}}}}};
    return schema.dump();
  }();
  return doc;
}

}  // namespace authorgan
