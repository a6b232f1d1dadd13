#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "authorgan/rng.hpp"
#include "authorgan/tensor.hpp"

namespace authorgan {

/// Images [N, data_shape...] scaled to [-1, 1], with optional integer labels.
struct Dataset {
  Tensor images;
  std::optional<std::vector<int>> labels;
  std::string source_path;
  /// Per-sample extents: [C,H,W] for images, [D] for feature vectors.
  Shape data_shape;

  std::size_t size() const noexcept { return images.shape().front(); }
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxImages4dMagic = 0x00000804;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxHeader {
  std::uint32_t magic = 0;
  /// Declared extents, big-endian decoded.
  std::vector<std::uint32_t> dims;
};

/// Reads only the magic and dimension words of an unsigned-byte IDX file.
IdxHeader read_idx_header(const std::filesystem::path& path);

/// Big-endian IDX images (0x803 [N,H,W], 0x804 [N,C,H,W], 0x802 [N,D]) and
/// optional labels (0x801). Bytes b become 2*(b/255) - 1. Wrong magic or a
/// short payload throws FormatError; a missing file throws IoError.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::optional<std::filesystem::path>& labels_path = std::nullopt);

/// Raw fallback: "GFD1", u32 N,C,H,W little-endian, then N*C*H*W float32
/// values in [-1, 1].
Dataset load_gfd(const std::filesystem::path& path,
                 const std::optional<std::filesystem::path>& labels_path = std::nullopt);
void write_gfd(const std::filesystem::path& path, const Dataset& ds);

/// Extension dispatch: .gfd reads GFD1; .pkl looks for a converted sibling
/// (.idx, then .gfd) and otherwise fails with a pointer to
/// tools/convert_dataset.py; anything else is read as IDX. Relative paths are
/// taken from base_dir. Without an explicit labels path, a sibling
/// "<stem>.labels.idx" (or the images-idx3 -> labels-idx1 MNIST name) is used
/// when present.
Dataset load_dataset(const std::string& data_path, const std::optional<std::string>& labels_path,
                     const std::filesystem::path& base_dir = {});

struct Batch {
  Tensor images;
  std::optional<std::vector<int>> labels;
};

/// Index lists covering 0..n-1 exactly once; the final batch may be short.
/// With shuffle the order is a Fisher-Yates permutation drawn from rng.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    RngStream& rng, bool shuffle);

std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size, RngStream& rng,
                                bool shuffle);

Batch gather_batch(const Dataset& ds, const std::vector<std::size_t>& indices);

/// n samples of N(mean, std^2 I) clipped to [-1, 1]; data shape [mean.size()].
Dataset synth_gaussian(std::size_t n, const std::vector<double>& mean, double std,
                       RngStream& rng);

}  // namespace authorgan
