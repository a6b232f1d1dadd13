#include "authorgan/documents.hpp"

#include <json.hpp>

#include "authorgan/harness.hpp"
#include "authorgan/layers.hpp"
#include "authorgan/models.hpp"

namespace authorgan {

using nlohmann::json;

namespace {

json value_json(const ParamValue& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

json layers_json(const std::vector<LayerSpec>& layers) {
  json arr = json::array();
  for (const auto& l : layers) {
    json j = {{"kind", l.kind}};
    if (!l.params.empty()) {
      json p = json::object();
      for (const auto& [k, v] : l.params) p[k] = value_json(v);
      j["params"] = p;
    }
    arr.push_back(j);
  }
  return arr;
}

const char* display_name(const std::string& preset) {
  if (preset == "gan") return "Vanilla GAN";
  if (preset == "cgan") return "Conditional GAN";
  if (preset == "dcgan") return "Deep Convolutional GAN";
  if (preset == "wgan") return "Wasserstein GAN";
  return "Wasserstein GAN with Gradient Penalty";
}

}  // namespace

const std::string& palette_json() {
  static const std::string doc = [] {
    json arr = json::array();
    for (const auto& e : palette()) {
      json params = json::array();
      for (const auto& s : e.params) {
        json p = {{"name", s.name},
                  {"type", param_type_name(s.type)},
                  {"required", !s.default_value.has_value()}};
        if (s.default_value) p["default"] = value_json(*s.default_value);
        const auto& c = s.constraint;
        json cj = json::object();
        if (c.min) cj[c.exclusive_min ? "exclusive_min" : "min"] = *c.min;
        if (c.max) cj[c.exclusive_max ? "exclusive_max" : "max"] = *c.max;
        if (!c.one_of.empty()) cj["one_of"] = c.one_of;
        if (!cj.empty()) {
          cj["text"] = c.describe();
          p["constraint"] = cj;
        }
        params.push_back(p);
      }
      arr.push_back({{"kind", e.kind},
                     {"category", category_name(e.category)},
                     {"display_name", e.display_name},
                     {"description", e.description},
                     {"graph_layer", e.is_graph_layer()},
                     {"executable", e.is_executable()},
                     {"params", params}});
    }
    return arr.dump();
  }();
  return doc;
}

const std::string& presets_json() {
  static const std::string doc = [] {
    const Shape reference{1, 28, 28};
    json presets = json::array();
    for (const auto& name : preset_names()) {
      const PresetDefaults d = preset_defaults(name);
      const LayerSpec opt = optimizer_to_spec(d.optimizer);
      json opt_params = json::object();
      for (const auto& [k, v] : opt.params) opt_params[k] = value_json(v);
      json process = {{"choice", process_name(d.process.kind)}};
      if (d.process.kind == ProcessKind::wgan_clip) {
        process["params"] = {{"n_critic", d.process.n_critic},
                             {"clip_value", d.process.clip_value}};
      } else if (d.process.kind == ProcessKind::wgan_gp) {
        process["params"] = {{"n_critic", d.process.n_critic},
                             {"gp_lambda", d.process.gp_lambda}};
      } else if (d.process.kind == ProcessKind::conditional) {
        process["params"] = {{"label_count", d.process.label_count}};
      }
      presets.push_back(
          {{"name", name},
           {"display_name", display_name(name)},
           {"defaults",
            {{"loss", loss_palette_kind(d.loss)},
             {"optimizer", {{"kind", opt.kind}, {"params", opt_params}}},
             {"train_process", process}}},
           {"generator", layers_json(preset_generator(name, 100, reference))},
           {"discriminator", layers_json(preset_discriminator(name, reference))}});
    }
    json doc = {
        {"presets", presets},
        {"reference", {{"latent_dim", 100}, {"data_shape", reference}}},
        {"pairing_rule",
         "The discriminator's preset family supplies the loss pair, both optimizers and the "
         "training process; a custom discriminator defers to the generator's family and two "
         "custom networks use the gan defaults. Explicit loss, optimizer and train_process "
         "fields override."},
        {"matrix",
         {{"generators", matrix_generators()}, {"discriminators", matrix_discriminators()}}}};
    return doc.dump();
  }();
  return doc;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace authorgan
