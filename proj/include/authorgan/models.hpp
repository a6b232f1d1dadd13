#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "authorgan/autograd.hpp"
#include "authorgan/layers.hpp"
#include "authorgan/optim.hpp"

namespace authorgan {

// --- losses ------------------------------------------------------------------

enum class LossKind { bce, mse, l1, wasserstein };

std::string_view loss_palette_kind(LossKind k);
/// Maps a loss palette kind (BCE, MSE, L1, Wasserstein) to its LossKind.
LossKind loss_from_kind(std::string_view palette_kind);

/// Probabilities are clamped to [kProbabilityFloor, 1 - kProbabilityFloor].
inline constexpr double kProbabilityFloor = 1e-7;

/// -mean[y ln p + (1-y) ln(1-p)]. Throws ContractError if any p lies outside [0,1].
Var bce_loss(const Var& probabilities, const Var& targets);
Var mse_loss(const Var& predictions, const Var& targets);
Var l1_loss(const Var& predictions, const Var& targets);
/// Critic objective mean(fake) - mean(real).
Var wasserstein_critic_loss(const Var& real_scores, const Var& fake_scores);
/// Generator objective -mean(fake).
Var wasserstein_generator_loss(const Var& fake_scores);

/// Discriminator loss for a family: Wasserstein uses the critic objective,
/// the others average the real-vs-1 and fake-vs-0 terms.
Var discriminator_loss(LossKind kind, const Var& real_scores, const Var& fake_scores);
/// Generator loss for a family: fake scores pushed toward the real target.
Var generator_loss(LossKind kind, const Var& fake_scores);

// --- training process --------------------------------------------------------

enum class ProcessKind { standard, wgan_clip, wgan_gp, conditional };

std::string_view process_name(ProcessKind k);
std::optional<ProcessKind> process_from_name(std::string_view name);

struct TrainingProcess {
  ProcessKind kind = ProcessKind::standard;
  int n_critic = 5;
  double clip_value = 0.01;
  double gp_lambda = 10.0;
  std::size_t label_count = 10;

  bool operator==(const TrainingProcess&) const = default;
};

// --- presets -----------------------------------------------------------------

/// Registry order: gan, cgan, dcgan, wgan, wgan_gp.
const std::vector<std::string>& preset_names();
bool is_preset(std::string_view name);

struct PresetDefaults {
  LossKind loss;
  OptimizerConfig optimizer;
  TrainingProcess process;
};

/// Throws RegistryError listing valid names for unknown presets.
PresetDefaults preset_defaults(std::string_view name);
/// Generator consuming [latent_dim] and producing data_shape through Tanh.
std::vector<LayerSpec> preset_generator(std::string_view name, std::size_t latent_dim,
                                        const Shape& data_shape);
/// Discriminator consuming data_shape and producing one score per sample.
std::vector<LayerSpec> preset_discriminator(std::string_view name, const Shape& data_shape);

// --- seeding -----------------------------------------------------------------

/// A run seed feeds several independent streams, one per role.
enum class StreamRole : std::uint64_t {
  generator_init = 0,
  discriminator_init = 1,
  training = 2,
  sampling = 3,
};

/// Child stream number `role` of RngStream(seed) (see RngStream::split).
RngStream role_stream(std::uint64_t seed, StreamRole role);

// --- resolved model ----------------------------------------------------------

/// Everything needed to train: both networks with initialized parameters, the
/// bound losses and optimizers, and the training process.
struct ResolvedModel {
  std::string generator_name;      // preset name or "custom"
  std::string discriminator_name;  // preset name or "custom"
  Network generator;
  Network discriminator;
  LossKind generator_loss = LossKind::bce;
  LossKind discriminator_loss = LossKind::bce;
  OptimizerState generator_optimizer;
  OptimizerState discriminator_optimizer;
  TrainingProcess process;
  std::size_t latent_dim = 100;
  Shape data_shape;
  /// Set when either network consumes one-hot labels.
  std::optional<std::size_t> label_count;
  std::uint64_t seed = 0;
  std::size_t batch_size = 64;
  /// Which rule bound the losses/optimizers/process, for audit.
  std::string pairing;
};

/// One-hot encoding [N, label_count]; labels must lie in [0, label_count).
Tensor one_hot(const std::vector<int>& labels, std::size_t label_count);

/// lambda * mean[(||grad_x critic(x)|| - 1)^2] at the given interpolates. The
/// input gradient is built with create_graph so the penalty is differentiable
/// with respect to the critic parameters.
Var gradient_penalty_at(Network& critic, const Tensor& interpolates, double lambda,
                        ForwardContext& ctx);

/// Draws eps ~ U(0,1) per sample, forms eps*real + (1-eps)*fake and returns
/// gradient_penalty_at on it.
Var gradient_penalty(Network& critic, const Tensor& real_batch, const Tensor& fake_batch,
                     double lambda, RngStream& rng, ForwardContext& ctx);

struct StepMetrics {
  double gen_loss = 0.0;
  /// Critic/discriminator loss of the last critic update (penalty included).
  double disc_loss = 0.0;
  int critic_steps = 0;
  int generator_steps = 0;
  /// Max |critic parameter| after the step (clipping audit).
  double max_abs_critic_weight = 0.0;
};

/// One process step on a real batch [N, data_shape...]:
///   standard / conditional: one discriminator update on real+fake, then one
///     generator update;
///   wgan_clip: n_critic critic updates (fresh noise, same real batch), each
///     followed by clamping every critic parameter to [-c, c], then one
///     generator update;
///   wgan_gp: as wgan_clip with the gradient penalty added and no clamping.
/// Labels are required whenever model.label_count is set.
StepMetrics train_step(ResolvedModel& model, const Tensor& real_batch,
                       const std::vector<int>* labels, RngStream& rng);

/// Generator forward in eval mode for `n` latents drawn from rng. Labels cycle
/// through 0..label_count-1 for conditional generators.
Tensor generate(ResolvedModel& model, std::size_t n, RngStream& rng);

}  // namespace authorgan
