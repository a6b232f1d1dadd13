#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "authorgan/data.hpp"
#include "authorgan/models.hpp"

namespace authorgan {

struct StepRecord {
  std::int64_t step = 0;  // 1-based across the run
  std::int64_t epoch = 0;  // 1-based
  double gen_loss = 0.0;
  double disc_loss = 0.0;
};

struct EpochRecord {
  std::int64_t epoch = 0;
  std::int64_t steps = 0;
  /// Arithmetic means of the per-step losses.
  double gen_loss = 0.0;
  double disc_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainOptions {
  /// Stop after this many steps in total (the last epoch may be partial).
  std::optional<std::int64_t> max_steps;
  bool shuffle = true;
  /// Called on the training thread after every step.
  std::function<void(const StepRecord&)> on_step;
  /// Polled between steps; a set flag raises CancelledError.
  const std::atomic<bool>* cancel = nullptr;
};

struct TrainingReport {
  std::string generator_name;
  std::string discriminator_name;
  std::string generator_loss;
  std::string discriminator_loss;
  OptimizerConfig generator_optimizer;
  OptimizerConfig discriminator_optimizer;
  TrainingProcess process;
  std::string pairing;
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;
  std::size_t latent_dim = 0;
  Shape data_shape;
  std::size_t dataset_size = 0;
  std::vector<EpochRecord> epochs;
  std::vector<StepRecord> steps;
  /// Output files relative to the report, when written.
  std::optional<std::string> generator_params;
  std::optional<std::string> samples;

  double average_epoch_seconds() const;
};

/// Runs `epochs` passes of train_step over shuffled batches. Throws
/// NumericError(epoch, step) on the first non-finite loss and ContractError
/// when the model is conditional but the dataset has no labels.
TrainingReport train(ResolvedModel& model, const Dataset& ds, std::int64_t epochs,
                     const TrainOptions& options = {});

/// Versioned report document. Wall-clock values live only under "timing";
/// with include_timing=false that block is omitted, leaving a document that is
/// a pure function of spec, data and seed.
std::string report_json(const TrainingReport& report, bool include_timing = true);

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Writes generator.agp, a sample grid of `samples` images (skipped for
/// non-image data or samples == 0) and finally report.json into dir, filling
/// the report's artifact paths. The report lands last, so a crash leaves no
/// report next to half-written outputs.
void write_run_outputs(const std::filesystem::path& dir, ResolvedModel& model,
                       TrainingReport& report, std::size_t samples = 16,
                       bool include_timing = true);

/// "AGP1" parameter file: u32 count, then per tensor u32 name length, name,
/// u32 rank, u64 extents, float64 values (all little-endian).
void save_network_params(const std::filesystem::path& path, const Network& net);
void load_network_params(const std::filesystem::path& path, Network& net);

/// Generator / discriminator order used by the benchmark matrix.
const std::vector<std::string>& matrix_generators();
const std::vector<std::string>& matrix_discriminators();

struct MatrixRow {
  std::string generator;
  std::string discriminator;
  double final_gen_loss = 0.0;
  double final_disc_loss = 0.0;
  double avg_epoch_seconds = 0.0;
  std::string status;  // "ok" or "failed"
  std::string error;
  std::string loss;
  std::string process;
  std::string pairing;
};

struct MatrixReport {
  std::vector<MatrixRow> rows;
};

struct MatrixOptions {
  std::int64_t epochs = 1;
  std::int64_t batch_size = 64;
  std::uint64_t seed = 0;
  std::int64_t latent_dim = 100;
  std::optional<std::int64_t> max_steps;
  std::function<void(const MatrixRow&)> on_row;
};

/// Trains every generator x discriminator pair in order (generator-major) on
/// the same data and seed, one after another. Failures are recorded per row.
MatrixReport run_matrix(const std::vector<std::string>& generators,
                        const std::vector<std::string>& discriminators, const Dataset& ds,
                        const MatrixOptions& options = {});

std::string matrix_csv(const MatrixReport& report);
std::string matrix_json(const MatrixReport& report);

/// Generated images tiled row-major into a grid of `cols` columns; pixels are
/// bytes in [0,255]. shape is [rows*H, cols*W] for one channel and
/// [rows*H, cols*W, C] otherwise.
struct ImageGrid {
  Tensor pixels;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 1;
};

/// n generator samples in eval mode, cols = ceil(sqrt(n)). Needs [C,H,W] data
/// with C of 1 or 3 (ContractError otherwise).
ImageGrid sample_grid(ResolvedModel& model, std::size_t n, RngStream& rng);

/// Binary PGM (one channel) or PPM (three channels).
std::string encode_pnm(const ImageGrid& grid);

}  // namespace authorgan
