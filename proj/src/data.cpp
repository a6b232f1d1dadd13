#include "authorgan/data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "authorgan/error.hpp"

namespace authorgan {

namespace fs = std::filesystem;

namespace {

std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
  return os.str();
}

std::vector<unsigned char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t be32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

IdxHeader parse_header(const std::vector<unsigned char>& bytes, const fs::path& path) {
  if (bytes.size() < 4) {
    throw FormatError(path.string() + ": file too short for an IDX header (" +
                      std::to_string(bytes.size()) + " bytes)");
  }
  IdxHeader h;
  h.magic = be32(bytes.data());
  // 0x00 0x00, type 0x08 (unsigned byte), rank
  const unsigned rank = bytes[3];
  if (bytes[0] != 0 || bytes[1] != 0 || bytes[2] != 0x08 || rank < 1 || rank > 4) {
    throw FormatError(path.string() + ": bad IDX magic " + hex32(h.magic) +
                      " (expected unsigned-byte data such as 0x00000803 or 0x00000801)");
  }
  if (bytes.size() < 4 + 4 * std::size_t{rank}) {
    throw FormatError(path.string() + ": truncated IDX header");
  }
  for (unsigned i = 0; i < rank; ++i) h.dims.push_back(be32(bytes.data() + 4 + 4 * i));
  return h;
}

std::size_t payload_size(const IdxHeader& h) {
  std::size_t n = 1;
  for (auto d : h.dims) n *= d;
  return n;
}

std::vector<int> read_labels(const fs::path& path, std::size_t expected) {
  const auto bytes = read_all(path);
  const IdxHeader h = parse_header(bytes, path);
  if (h.magic != kIdxLabelsMagic) {
    throw FormatError(path.string() + ": bad label magic " + hex32(h.magic) + " (expected " +
                      hex32(kIdxLabelsMagic) + ")");
  }
  const std::size_t n = h.dims[0];
  if (bytes.size() < 8 + n) {
    throw FormatError(path.string() + ": truncated labels, expected " + std::to_string(n) +
                      " bytes of payload, found " + std::to_string(bytes.size() - 8));
  }
  if (n != expected) {
    throw FormatError(path.string() + ": " + std::to_string(n) + " labels for " +
                      std::to_string(expected) + " images");
  }
  return std::vector<int>(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(n));
}

}  // namespace

IdxHeader read_idx_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes(4 + 16);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  bytes.resize(static_cast<std::size_t>(in.gcount()));
  return parse_header(bytes, path);
}

Dataset load_idx(const fs::path& images_path, const std::optional<fs::path>& labels_path) {
  const auto bytes = read_all(images_path);
  const IdxHeader h = parse_header(bytes, images_path);
  if (h.magic != kIdxImagesMagic && h.magic != kIdxImages4dMagic && h.magic != 0x00000802) {
    throw FormatError(images_path.string() + ": bad image magic " + hex32(h.magic) +
                      " (expected " + hex32(kIdxImagesMagic) + ")");
  }
  const std::size_t offset = 4 + 4 * h.dims.size();
  const std::size_t count = payload_size(h);
  if (count == 0) throw FormatError(images_path.string() + ": zero extent in IDX header");
  if (bytes.size() < offset + count) {
    throw FormatError(images_path.string() + ": truncated payload, expected " +
                      std::to_string(count) + " bytes, found " +
                      std::to_string(bytes.size() - offset));
  }
  Dataset ds;
  ds.source_path = images_path.string();
  const std::size_t n = h.dims[0];
  if (h.dims.size() == 3) {
    ds.data_shape = {1, h.dims[1], h.dims[2]};
  } else {
    ds.data_shape.assign(h.dims.begin() + 1, h.dims.end());
  }
  Shape full{n};
  full.insert(full.end(), ds.data_shape.begin(), ds.data_shape.end());
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = 2.0 * (bytes[offset + i] / 255.0) - 1.0;
  ds.images = Tensor(std::move(full), std::move(values));
  if (labels_path) ds.labels = read_labels(*labels_path, n);
  return ds;
}

Dataset load_gfd(const fs::path& path, const std::optional<fs::path>& labels_path) {
  const auto bytes = read_all(path);
  if (bytes.size() < 20 || std::memcmp(bytes.data(), "GFD1", 4) != 0) {
    std::uint32_t magic = bytes.size() >= 4 ? be32(bytes.data()) : 0;
    throw FormatError(path.string() + ": bad GFD magic " + hex32(magic) + " (expected \"GFD1\")");
  }
  std::array<std::uint32_t, 4> dims{};
  for (std::size_t i = 0; i < 4; ++i) dims[i] = le32(bytes.data() + 4 + 4 * i);
  std::size_t count = 1;
  for (auto d : dims) {
    if (d == 0) throw FormatError(path.string() + ": zero extent in GFD1 header");
    count *= d;
  }
  if (bytes.size() < 20 + 4 * count) {
    throw FormatError(path.string() + ": truncated payload, expected " +
                      std::to_string(4 * count) + " bytes, found " +
                      std::to_string(bytes.size() - 20));
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = le32(bytes.data() + 20 + 4 * i);
    const float f = std::bit_cast<float>(bits);
    if (!(f >= -1.0f && f <= 1.0f)) {
      throw FormatError(path.string() + ": value " + std::to_string(f) + " at index " +
                        std::to_string(i) + " outside [-1, 1]");
    }
    values[i] = f;
  }
  Dataset ds;
  ds.source_path = path.string();
  ds.data_shape = {dims[1], dims[2], dims[3]};
  ds.images = Tensor(Shape{dims[0], dims[1], dims[2], dims[3]}, std::move(values));
  if (labels_path) ds.labels = read_labels(*labels_path, dims[0]);
  return ds;
}

void write_gfd(const fs::path& path, const Dataset& ds) {
  const Shape& s = ds.images.shape();
  if (s.size() != 4) throw ShapeError("GFD1 stores [N,C,H,W] images, got " + to_string(s));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("GFD1", 4);
  auto put32 = [&](std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  for (auto d : s) put32(static_cast<std::uint32_t>(d));
  for (double v : ds.images.data()) put32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) throw IoError("short write to " + path.string());
}

namespace {

std::optional<fs::path> discover_labels(const fs::path& images) {
  std::vector<fs::path> candidates;
  fs::path stem = images;
  candidates.push_back(stem.replace_extension(".labels.idx"));
  std::string name = images.filename().string();
  for (auto [from, to] : {std::pair{"images-idx3", "labels-idx1"},
                          std::pair{"images.idx3", "labels.idx1"}}) {
    if (auto pos = name.find(from); pos != std::string::npos) {
      std::string other = name;
      other.replace(pos, std::strlen(from), to);
      candidates.push_back(images.parent_path() / other);
    }
  }
  for (const auto& c : candidates) {
    if (fs::exists(c)) return c;
  }
  return std::nullopt;
}

}  // namespace

Dataset load_dataset(const std::string& data_path, const std::optional<std::string>& labels_path,
                     const fs::path& base_dir) {
  auto anchor = [&](const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  fs::path images = anchor(data_path);
  std::string ext = images.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".pkl") {
    fs::path idx = images, gfd = images;
    idx.replace_extension(".idx");
    gfd.replace_extension(".gfd");
    if (fs::exists(idx)) {
      images = idx;
      ext = ".idx";
    } else if (fs::exists(gfd)) {
      images = gfd;
      ext = ".gfd";
    } else {
      throw IoError(images.string() +
                    ": pickled data is not read directly; convert it with "
                    "tools/convert_dataset.py --pkl " + images.string() + " --out " +
                    (images.parent_path() / images.stem()).string() +
                    " (writes " + idx.filename().string() + ")");
    }
  }
  if (!fs::exists(images)) throw IoError("dataset not found: " + images.string());
  std::optional<fs::path> labels;
  if (labels_path) {
    labels = anchor(*labels_path);
  } else {
    labels = discover_labels(images);
  }
  return ext == ".gfd" ? load_gfd(images, labels) : load_idx(images, labels);
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    RngStream& rng, bool shuffle) {
  if (batch_size < 1) throw ContractError("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle) {
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

Batch gather_batch(const Dataset& ds, const std::vector<std::size_t>& idx) {
  const std::size_t per = numel(ds.data_shape);
  Shape shape{idx.size()};
  shape.insert(shape.end(), ds.data_shape.begin(), ds.data_shape.end());
  Batch b{Tensor(shape), std::nullopt};
  auto src = ds.images.data();
  auto dst = b.images.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(idx[i] * per), per,
                dst.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  if (ds.labels) {
    b.labels.emplace();
    for (auto i : idx) b.labels->push_back((*ds.labels)[i]);
  }
  return b;
}

std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size, RngStream& rng,
                                bool shuffle) {
  std::vector<Batch> out;
  for (const auto& idx : batch_indices(ds.size(), batch_size, rng, shuffle)) {
    out.push_back(gather_batch(ds, idx));
  }
  return out;
}

Dataset synth_gaussian(std::size_t n, const std::vector<double>& mean, double std,
                       RngStream& rng) {
  if (n < 1 || mean.empty()) throw ContractError("synth_gaussian needs n >= 1 and a mean vector");
  if (!(std > 0)) throw ContractError("synth_gaussian needs std > 0");
  const std::size_t d = mean.size();
  Tensor t(Shape{n, d});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      t[i * d + j] = std::clamp(mean[j] + std * rng.normal(), -1.0, 1.0);
    }
  }
  Dataset ds;
  ds.images = std::move(t);
  ds.data_shape = {d};
  ds.source_path = "synthetic:gaussian";
  return ds;
}

}  // namespace authorgan
