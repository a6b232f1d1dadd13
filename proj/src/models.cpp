#include "authorgan/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "authorgan/error.hpp"

namespace authorgan {

namespace {

Var filled_like(const Var& v, double fill) { return constant(Tensor(v.shape(), fill)); }

void require_probabilities(const Var& p) {
  for (double v : p.value().data()) {
    // NaN passes through so training reports it as a numeric failure
    if (!std::isnan(v) && !(v >= 0.0 && v <= 1.0)) {
      throw ContractError("BCE expects probabilities in [0,1], got " + std::to_string(v) +
                          "; end the discriminator with Sigmoid or pick a Wasserstein loss");
    }
  }
}

}  // namespace

std::string_view loss_palette_kind(LossKind k) {
  switch (k) {
    case LossKind::bce: return "BCE";
    case LossKind::mse: return "MSE";
    case LossKind::l1: return "L1";
    case LossKind::wasserstein: return "Wasserstein";
  }
  return "unknown";
}

LossKind loss_from_kind(std::string_view kind) {
  if (kind == "BCE") return LossKind::bce;
  if (kind == "MSE") return LossKind::mse;
  if (kind == "L1") return LossKind::l1;
  if (kind == "Wasserstein") return LossKind::wasserstein;
  throw ParamError("kind", "'" + std::string(kind) +
                               "' is not a loss (expected BCE, MSE, L1 or Wasserstein)");
}

Var bce_loss(const Var& p, const Var& y) {
  require_probabilities(p);
  Var pc = clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
  Var pos = mul(y, log(pc));
  Var negative = mul(add_scalar(neg(y), 1.0), log(add_scalar(neg(pc), 1.0)));
  return neg(mean(add(pos, negative)));
}

Var mse_loss(const Var& p, const Var& y) { return mean(square(sub(p, y))); }

Var l1_loss(const Var& p, const Var& y) { return mean(abs(sub(p, y))); }

Var wasserstein_critic_loss(const Var& real, const Var& fake) {
  return sub(mean(fake), mean(real));
}

Var wasserstein_generator_loss(const Var& fake) { return neg(mean(fake)); }

Var discriminator_loss(LossKind kind, const Var& real, const Var& fake) {
  auto half = [](const Var& a, const Var& b) { return scale(add(a, b), 0.5); };
  switch (kind) {
    case LossKind::bce:
      return half(bce_loss(real, filled_like(real, 1.0)), bce_loss(fake, filled_like(fake, 0.0)));
    case LossKind::mse:
      return half(mse_loss(real, filled_like(real, 1.0)), mse_loss(fake, filled_like(fake, 0.0)));
    case LossKind::l1:
      return half(l1_loss(real, filled_like(real, 1.0)), l1_loss(fake, filled_like(fake, 0.0)));
    case LossKind::wasserstein:
      return wasserstein_critic_loss(real, fake);
  }
  throw ContractError("unknown loss kind");
}

Var generator_loss(LossKind kind, const Var& fake) {
  switch (kind) {
    case LossKind::bce: return bce_loss(fake, filled_like(fake, 1.0));
    case LossKind::mse: return mse_loss(fake, filled_like(fake, 1.0));
    case LossKind::l1: return l1_loss(fake, filled_like(fake, 1.0));
    case LossKind::wasserstein: return wasserstein_generator_loss(fake);
  }
  throw ContractError("unknown loss kind");
}

std::string_view process_name(ProcessKind k) {
  switch (k) {
    case ProcessKind::standard: return "standard";
    case ProcessKind::wgan_clip: return "wgan_clip";
    case ProcessKind::wgan_gp: return "wgan_gp";
    case ProcessKind::conditional: return "conditional";
  }
  return "unknown";
}

std::optional<ProcessKind> process_from_name(std::string_view name) {
  for (auto k : {ProcessKind::standard, ProcessKind::wgan_clip, ProcessKind::wgan_gp,
                 ProcessKind::conditional}) {
    if (process_name(k) == name) return k;
  }
  return std::nullopt;
}

// --- presets -----------------------------------------------------------------

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"gan", "cgan", "dcgan", "wgan", "wgan_gp"};
  return names;
}

bool is_preset(std::string_view name) {
  const auto& n = preset_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

namespace {

void require_preset(std::string_view name) {
  if (is_preset(name)) return;
  std::string valid;
  for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw RegistryError("unknown preset '" + std::string(name) + "' (valid: " + valid + ")");
}

LayerSpec layer(std::string kind, ParamMap params = {}) {
  return LayerSpec{std::move(kind), std::move(params)};
}

LayerSpec dense(std::int64_t units) { return layer("Dense", {{"units", units}}); }
LayerSpec lrelu() { return layer("LeakyReLU", {{"alpha", 0.2}}); }

LayerSpec conv(const char* kind, std::int64_t filters) {
  return layer(kind, {{"filters", filters},
                      {"kernel", std::int64_t{4}},
                      {"stride", std::int64_t{2}},
                      {"padding", std::int64_t{1}}});
}

std::vector<std::int64_t> as_params(const Shape& s) {
  return std::vector<std::int64_t>(s.begin(), s.end());
}

void require_dcgan_shape(const Shape& data) {
  if (data.size() != 3 || data[1] % 4 != 0 || data[2] % 4 != 0) {
    throw ShapeError("dcgan needs [C,H,W] data with H and W divisible by 4, got " +
                     to_string(data));
  }
}

}  // namespace

PresetDefaults preset_defaults(std::string_view name) {
  require_preset(name);
  OptimizerConfig adam_dcgan{OptimizerKind::adam, 2e-4, 0.5, 0.999, 0.9, 1e-8};
  if (name == "gan" || name == "dcgan") return {LossKind::bce, adam_dcgan, {}};
  if (name == "cgan") {
    TrainingProcess p;
    p.kind = ProcessKind::conditional;
    return {LossKind::bce, adam_dcgan, p};
  }
  if (name == "wgan") {
    TrainingProcess p;
    p.kind = ProcessKind::wgan_clip;
    return {LossKind::wasserstein, {OptimizerKind::rmsprop, 5e-5, 0.9, 0.999, 0.9, 1e-8}, p};
  }
  TrainingProcess p;
  p.kind = ProcessKind::wgan_gp;
  return {LossKind::wasserstein, {OptimizerKind::adam, 1e-4, 0.0, 0.9, 0.9, 1e-8}, p};
}

std::vector<LayerSpec> preset_generator(std::string_view name, std::size_t latent_dim,
                                        const Shape& data) {
  require_preset(name);
  if (latent_dim < 1) throw ShapeError("latent_dim must be >= 1");
  if (name == "dcgan") {
    require_dcgan_shape(data);
    const auto h = static_cast<std::int64_t>(data[1] / 4);
    const auto w = static_cast<std::int64_t>(data[2] / 4);
    return {dense(128 * h * w),
            layer("Reshape", {{"shape", std::vector<std::int64_t>{128, h, w}}}),
            layer("BatchNorm"),
            layer("ReLU"),
            conv("ConvTranspose2D", 64),
            layer("BatchNorm"),
            layer("ReLU"),
            conv("ConvTranspose2D", static_cast<std::int64_t>(data[0])),
            layer("Tanh")};
  }
  std::vector<LayerSpec> g;
  if (name == "cgan") g.push_back(layer("Concatenate"));
  for (std::int64_t units : {256, 512, 1024}) {
    g.push_back(dense(units));
    g.push_back(lrelu());
  }
  g.push_back(dense(static_cast<std::int64_t>(numel(data))));
  g.push_back(layer("Tanh"));
  g.push_back(layer("Reshape", {{"shape", as_params(data)}}));
  return g;
}

std::vector<LayerSpec> preset_discriminator(std::string_view name, const Shape& data) {
  require_preset(name);
  if (name == "dcgan") {
    require_dcgan_shape(data);
    return {conv("Conv2D", 64),  lrelu(),          conv("Conv2D", 128),
            layer("BatchNorm"),  lrelu(),          layer("Flatten"),
            dense(1),            layer("Sigmoid")};
  }
  std::vector<LayerSpec> d{layer("Flatten")};
  if (name == "cgan") d.push_back(layer("Concatenate"));
  d.insert(d.end(), {dense(512), lrelu(), dense(256), lrelu(), dense(1)});
  // critics keep a linear head
  if (name != "wgan" && name != "wgan_gp") d.push_back(layer("Sigmoid"));
  return d;
}

RngStream role_stream(std::uint64_t seed, StreamRole role) {
  RngStream root(seed);
  for (auto i = static_cast<std::uint64_t>(role); i > 0; --i) root.next_u64();
  return root.split();
}

// --- training ----------------------------------------------------------------

Tensor one_hot(const std::vector<int>& labels, std::size_t label_count) {
  if (labels.empty()) throw ShapeError("one_hot needs at least one label");
  Tensor out(Shape{labels.size(), label_count});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= label_count) {
      throw ContractError("label " + std::to_string(labels[i]) + " outside [0, " +
                          std::to_string(label_count) + ")");
    }
    out[i * label_count + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  return out;
}

Var gradient_penalty_at(Network& critic, const Tensor& interpolates, double lambda,
                        ForwardContext& ctx) {
  GradModeGuard on(true);
  Var x = parameter(interpolates);
  Var scores = critic.forward(x, ctx);
  Var g = grad(sum(scores), {x}, /*create_graph=*/true)[0];
  const std::size_t n = interpolates.shape()[0];
  Var flat = reshape(g, Shape{n, interpolates.size() / n});
  Var norm = sqrt(add_scalar(sum_to(square(flat), Shape{n, 1}), 1e-12));
  return scale(mean(square(add_scalar(norm, -1.0))), lambda);
}

Var gradient_penalty(Network& critic, const Tensor& real, const Tensor& fake, double lambda,
                     RngStream& rng, ForwardContext& ctx) {
  if (real.shape() != fake.shape()) {
    throw ShapeError("gradient penalty needs equal batches, got real " + to_string(real.shape()) +
                     " and fake " + to_string(fake.shape()));
  }
  const std::size_t n = real.shape()[0];
  const std::size_t per = real.size() / n;
  Tensor mixed(real.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double eps = rng.uniform();
    for (std::size_t j = 0; j < per; ++j) {
      const std::size_t k = i * per + j;
      mixed[k] = eps * real[k] + (1.0 - eps) * fake[k];
    }
  }
  return gradient_penalty_at(critic, mixed, lambda, ctx);
}

namespace {

double max_abs_param(const Network& net) {
  double m = 0.0;
  for (const auto& p : net.parameters()) {
    for (double v : p.value().data()) m = std::max(m, std::abs(v));
  }
  return m;
}

Tensor latents(const ResolvedModel& model, std::size_t n, RngStream& rng) {
  return Tensor::randn(Shape{n, model.latent_dim}, rng);
}

}  // namespace

StepMetrics train_step(ResolvedModel& model, const Tensor& real_batch,
                       const std::vector<int>* labels, RngStream& rng) {
  Shape expect{real_batch.shape()[0]};
  expect.insert(expect.end(), model.data_shape.begin(), model.data_shape.end());
  if (real_batch.shape() != expect) {
    throw ShapeError("batch " + to_string(real_batch.shape()) + " does not match data shape " +
                     to_string(model.data_shape));
  }
  const std::size_t n = expect[0];
  const auto& proc = model.process;
  const bool needs_labels =
      model.label_count.has_value() || proc.kind == ProcessKind::conditional;
  if (needs_labels && (labels == nullptr || labels->size() != n)) {
    throw ContractError("this model is conditional and needs one label per sample");
  }

  ForwardContext ctx;
  ctx.mode = Mode::train;
  ctx.rng = &rng;
  if (model.label_count) ctx.labels = constant(one_hot(*labels, *model.label_count));

  Network& gen = model.generator;
  Network& disc = model.discriminator;
  const Var real = constant(real_batch);
  const bool critic_loop =
      proc.kind == ProcessKind::wgan_clip || proc.kind == ProcessKind::wgan_gp;
  const int critic_iters = critic_loop ? proc.n_critic : 1;

  StepMetrics m;
  gen.set_requires_grad(false);
  disc.set_requires_grad(true);
  for (int it = 0; it < critic_iters; ++it) {
    Tensor fake;
    {
      NoGrad off;
      fake = gen.forward(constant(latents(model, n, rng)), ctx).value();
    }
    disc.zero_grad();
    Var loss = discriminator_loss(model.discriminator_loss, disc.forward(real, ctx),
                                  disc.forward(constant(fake), ctx));
    if (proc.kind == ProcessKind::wgan_gp) {
      loss = add(loss, gradient_penalty(disc, real_batch, fake, proc.gp_lambda, rng, ctx));
    }
    backward(loss);
    optimizer_step(model.discriminator_optimizer, disc.parameters());
    if (proc.kind == ProcessKind::wgan_clip) {
      const double c = proc.clip_value;
      for (auto p : disc.parameters()) {
        for (auto& v : p.mutable_value().data()) v = std::clamp(v, -c, c);
      }
    }
    m.disc_loss = loss.value().item();
    ++m.critic_steps;
  }

  disc.set_requires_grad(false);
  gen.set_requires_grad(true);
  gen.zero_grad();
  Var fake = gen.forward(constant(latents(model, n, rng)), ctx);
  Var gl = generator_loss(model.generator_loss, disc.forward(fake, ctx));
  backward(gl);
  optimizer_step(model.generator_optimizer, gen.parameters());
  m.gen_loss = gl.value().item();
  ++m.generator_steps;

  disc.set_requires_grad(true);
  disc.zero_grad();
  gen.zero_grad();
  m.max_abs_critic_weight = max_abs_param(disc);
  return m;
}

Tensor generate(ResolvedModel& model, std::size_t n, RngStream& rng) {
  if (n < 1) throw ShapeError("generate needs n >= 1");
  NoGrad off;
  ForwardContext ctx;
  ctx.mode = Mode::eval;
  if (model.label_count) {
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % *model.label_count);
    ctx.labels = constant(one_hot(labels, *model.label_count));
  }
  return model.generator.forward(constant(latents(model, n, rng)), ctx).value();
}

}  // namespace authorgan
