#include "authorgan/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "authorgan/error.hpp"
#include "authorgan/spec.hpp"

namespace authorgan {

namespace fs = std::filesystem;
using nlohmann::json;

double TrainingReport::average_epoch_seconds() const {
  if (epochs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& e : epochs) total += e.wall_seconds;
  return total / static_cast<double>(epochs.size());
}

TrainingReport train(ResolvedModel& model, const Dataset& ds, std::int64_t epochs,
                     const TrainOptions& options) {
  if (epochs < 1) throw ContractError("epochs must be >= 1");
  if (ds.data_shape != model.data_shape) {
    throw ShapeError("dataset samples are " + to_string(ds.data_shape) +
                     " but the model was resolved for " + to_string(model.data_shape));
  }
  const bool conditional =
      model.label_count.has_value() || model.process.kind == ProcessKind::conditional;
  if (conditional) {
    if (!ds.labels) {
      throw ContractError("the model is conditional but " + ds.source_path +
                          " has no labels (set labels_path)");
    }
    const auto count = static_cast<int>(model.label_count.value_or(model.process.label_count));
    for (int l : *ds.labels) {
      if (l < 0 || l >= count) {
        throw ContractError("label " + std::to_string(l) + " outside [0, " +
                            std::to_string(count) + ")");
      }
    }
  }

  TrainingReport r;
  r.generator_name = model.generator_name;
  r.discriminator_name = model.discriminator_name;
  r.generator_loss = loss_palette_kind(model.generator_loss);
  r.discriminator_loss = loss_palette_kind(model.discriminator_loss);
  r.generator_optimizer = model.generator_optimizer.config;
  r.discriminator_optimizer = model.discriminator_optimizer.config;
  r.process = model.process;
  r.pairing = model.pairing;
  r.seed = model.seed;
  r.batch_size = model.batch_size;
  r.latent_dim = model.latent_dim;
  r.data_shape = model.data_shape;
  r.dataset_size = ds.size();

  RngStream rng = role_stream(model.seed, StreamRole::training);
  std::int64_t step = 0;
  bool done = false;
  for (std::int64_t epoch = 1; epoch <= epochs && !done; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    for (const auto& idx : batch_indices(ds.size(), model.batch_size, rng, options.shuffle)) {
      if (options.cancel && options.cancel->load()) throw CancelledError();
      Batch b = gather_batch(ds, idx);
      const std::vector<int>* labels = conditional ? &*b.labels : nullptr;
      StepMetrics m = train_step(model, b.images, labels, rng);
      ++step;
      if (!std::isfinite(m.gen_loss) || !std::isfinite(m.disc_loss)) {
        throw NumericError(static_cast<int>(epoch), static_cast<int>(step),
                           "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                               std::to_string(step) + " (generator " +
                               std::to_string(m.gen_loss) + ", discriminator " +
                               std::to_string(m.disc_loss) + ")");
      }
      StepRecord s{step, epoch, m.gen_loss, m.disc_loss};
      r.steps.push_back(s);
      if (options.on_step) options.on_step(s);
      rec.gen_loss += m.gen_loss;
      rec.disc_loss += m.disc_loss;
      ++rec.steps;
      if (options.max_steps && step >= *options.max_steps) {
        done = true;
        break;
      }
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    rec.wall_seconds = std::max(elapsed.count(), 1e-9);
    rec.gen_loss /= static_cast<double>(rec.steps);
    rec.disc_loss /= static_cast<double>(rec.steps);
    r.epochs.push_back(rec);
  }
  return r;
}

namespace {

json optimizer_json(const OptimizerConfig& c) {
  json j = {{"kind", optimizer_palette_kind(c.kind)}, {"lr", c.lr}};
  if (c.kind == OptimizerKind::adam) {
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
  }
  if (c.kind == OptimizerKind::rmsprop) j["rho"] = c.rho;
  if (c.kind != OptimizerKind::sgd) j["epsilon"] = c.epsilon;
  return j;
}

json process_json(const TrainingProcess& p) {
  json j = {{"kind", process_name(p.kind)}};
  if (p.kind == ProcessKind::wgan_clip || p.kind == ProcessKind::wgan_gp) {
    j["n_critic"] = p.n_critic;
  }
  if (p.kind == ProcessKind::wgan_clip) j["clip_value"] = p.clip_value;
  if (p.kind == ProcessKind::wgan_gp) j["gp_lambda"] = p.gp_lambda;
  if (p.kind == ProcessKind::conditional) j["label_count"] = p.label_count;
  return j;
}

}  // namespace

std::string report_json(const TrainingReport& r, bool include_timing) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"steps", e.steps},
                      {"gen_loss", e.gen_loss},
                      {"disc_loss", e.disc_loss}});
  }
  json steps = json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"step", s.step},
                     {"epoch", s.epoch},
                     {"gen_loss", s.gen_loss},
                     {"disc_loss", s.disc_loss}});
  }
  json doc = {
      {"report_version", 1},
      {"config",
       {{"generator", r.generator_name},
        {"discriminator", r.discriminator_name},
        {"generator_loss", r.generator_loss},
        {"discriminator_loss", r.discriminator_loss},
        {"generator_optimizer", optimizer_json(r.generator_optimizer)},
        {"discriminator_optimizer", optimizer_json(r.discriminator_optimizer)},
        {"process", process_json(r.process)},
        {"pairing", r.pairing},
        {"seed", r.seed},
        {"batch_size", r.batch_size},
        {"latent_dim", r.latent_dim},
        {"data_shape", r.data_shape},
        {"dataset_size", r.dataset_size}}},
      {"epochs", epochs},
      {"steps", steps},
  };
  if (!r.epochs.empty()) {
    doc["final"] = {{"gen_loss", r.epochs.back().gen_loss},
                    {"disc_loss", r.epochs.back().disc_loss}};
  }
  json artifacts = json::object();
  if (r.generator_params) artifacts["generator_params"] = *r.generator_params;
  if (r.samples) artifacts["samples"] = *r.samples;
  doc["artifacts"] = artifacts;
  if (include_timing) {
    json walls = json::array();
    for (const auto& e : r.epochs) walls.push_back(e.wall_seconds);
    doc["timing"] = {{"epoch_wall_seconds", walls},
                     {"avg_epoch_seconds", r.average_epoch_seconds()}};
  }
  return doc.dump(2) + "\n";
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw IoError("short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

// --- parameter files ---------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::vector<std::pair<std::string, Var>> named_params(const Network& net) {
  std::vector<std::pair<std::string, Var>> out;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    for (const auto& [name, v] : net.layers()[i].parameters()) {
      out.emplace_back(std::to_string(i) + "." + name, v);
    }
  }
  return out;
}

class Reader {
 public:
  Reader(std::string bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}
  std::uint64_t get(int width) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size()) {
      throw FormatError(path_ + ": truncated parameter file");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= std::uint64_t{static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])}
           << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string text(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError(path_ + ": truncated parameter file");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::string bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_network_params(const fs::path& path, const Network& net) {
  std::string out = "AGP1";
  const auto params = named_params(net);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, v] : params) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(v.shape().size()));
    for (auto d : v.shape()) put_u64(out, d);
    for (double x : v.value().data()) put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
  write_file_atomic(path, out);
}

void load_network_params(const fs::path& path, Network& net) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  Reader r(std::move(bytes), path.string());
  if (r.text(4) != "AGP1") throw FormatError(path.string() + ": not an AGP1 parameter file");
  auto params = named_params(net);
  const auto count = r.get(4);
  if (count != params.size()) {
    throw ShapeError(path.string() + " holds " + std::to_string(count) +
                     " tensors, network has " + std::to_string(params.size()));
  }
  for (auto& [name, v] : params) {
    const std::string stored = r.text(r.get(4));
    Shape shape(r.get(4));
    for (auto& d : shape) d = r.get(8);
    if (stored != name || shape != v.shape()) {
      throw ShapeError(path.string() + ": tensor " + stored + " " + to_string(shape) +
                       " does not match " + name + " " + to_string(v.shape()));
    }
    for (auto& x : v.mutable_value().data()) x = std::bit_cast<double>(r.get(8));
  }
}

// --- matrix ------------------------------------------------------------------

const std::vector<std::string>& matrix_generators() {
  static const std::vector<std::string> g = {"gan", "wgan", "wgan_gp", "dcgan"};
  return g;
}

const std::vector<std::string>& matrix_discriminators() {
  static const std::vector<std::string> d = {"gan", "dcgan", "wgan", "wgan_gp"};
  return d;
}

MatrixReport run_matrix(const std::vector<std::string>& generators,
                        const std::vector<std::string>& discriminators, const Dataset& ds,
                        const MatrixOptions& options) {
  MatrixReport report;
  for (const auto& g : generators) {
    for (const auto& d : discriminators) {
      MatrixRow row;
      row.generator = g;
      row.discriminator = d;
      try {
        GanSpec spec;
        spec.gan_model.epochs = options.epochs;
        spec.gan_model.batch_size = options.batch_size;
        spec.gan_model.seed = options.seed;
        spec.gan_model.latent_dim = options.latent_dim;
        spec.generator.choice = g;
        spec.discriminator.choice = d;
        spec.data_path = ds.source_path.empty() ? "in-memory.idx" : ds.source_path;
        ResolvedModel model = resolve(spec, ds.data_shape);
        row.loss = loss_palette_kind(model.discriminator_loss);
        row.process = process_name(model.process.kind);
        row.pairing = model.pairing;
        TrainOptions topts;
        topts.max_steps = options.max_steps;
        TrainingReport r = train(model, ds, options.epochs, topts);
        row.final_gen_loss = r.epochs.back().gen_loss;
        row.final_disc_loss = r.epochs.back().disc_loss;
        row.avg_epoch_seconds = r.average_epoch_seconds();
        row.status = "ok";
      } catch (const Error& e) {
        row.final_gen_loss = row.final_disc_loss = std::nan("");
        row.status = "failed";
        row.error = e.what();
      }
      if (options.on_row) options.on_row(row);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

namespace {

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string matrix_csv(const MatrixReport& report) {
  std::string out = "generator,discriminator,final_gen_loss,final_disc_loss,avg_epoch_seconds,status\n";
  for (const auto& r : report.rows) {
    out += r.generator + "," + r.discriminator + "," + g6(r.final_gen_loss) + "," +
           g6(r.final_disc_loss) + "," + g6(r.avg_epoch_seconds) + "," + r.status + "\n";
  }
  return out;
}

std::string matrix_json(const MatrixReport& report) {
  json rows = json::array();
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    json j = {{"index", i + 1},
              {"generator", r.generator},
              {"discriminator", r.discriminator},
              {"final_gen_loss", finite_or_null(r.final_gen_loss)},
              {"final_disc_loss", finite_or_null(r.final_disc_loss)},
              {"avg_epoch_seconds", r.avg_epoch_seconds},
              {"status", r.status},
              {"loss", r.loss},
              {"process", r.process},
              {"pairing", r.pairing}};
    if (!r.error.empty()) j["error"] = r.error;
    rows.push_back(std::move(j));
  }
  return json({{"matrix_version", 1}, {"rows", rows}}).dump(2) + "\n";
}

// --- sample grids ------------------------------------------------------------

ImageGrid sample_grid(ResolvedModel& model, std::size_t n, RngStream& rng) {
  const Shape& s = model.data_shape;
  if (s.size() != 3 || (s[0] != 1 && s[0] != 3)) {
    throw ContractError("sample grids need [C,H,W] image data with 1 or 3 channels, got " +
                        to_string(s));
  }
  if (n < 1) throw ContractError("sample grid needs n >= 1");
  const std::size_t c = s[0], h = s[1], w = s[2];
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t rows = (n + cols - 1) / cols;
  const Tensor images = generate(model, n, rng);

  ImageGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.channels = c;
  Shape shape{rows * h, cols * w};
  if (c > 1) shape.push_back(c);
  grid.pixels = Tensor(shape);
  const std::size_t width = cols * w;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t gr = k / cols, gc = k % cols;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double v = images[((k * c + ch) * h + y) * w + x];
          const double byte = std::round(std::clamp((v + 1.0) * 0.5, 0.0, 1.0) * 255.0);
          const std::size_t py = gr * h + y, px = gc * w + x;
          grid.pixels[(py * width + px) * c + ch] = byte;
        }
  }
  return grid;
}

std::string encode_pnm(const ImageGrid& grid) {
  const Shape& s = grid.pixels.shape();
  const bool color = grid.channels == 3;
  std::string out = (color ? "P6\n" : "P5\n") + std::to_string(s[1]) + " " +
                    std::to_string(s[0]) + "\n255\n";
  for (double v : grid.pixels.data()) out.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  return out;
}

void write_run_outputs(const std::filesystem::path& dir, ResolvedModel& model,
                       TrainingReport& report, std::size_t samples, bool include_timing) {
  std::filesystem::create_directories(dir);
  save_network_params(dir / "generator.agp", model.generator);
  report.generator_params = "generator.agp";
  const Shape& s = model.data_shape;
  if (samples > 0 && s.size() == 3 && (s[0] == 1 || s[0] == 3)) {
    RngStream rng = role_stream(model.seed, StreamRole::sampling);
    const ImageGrid grid = sample_grid(model, samples, rng);
    const char* name = grid.channels == 3 ? "samples.ppm" : "samples.pgm";
    write_file_atomic(dir / name, encode_pnm(grid));
    report.samples = name;
  }
  write_file_atomic(dir / "report.json", report_json(report, include_timing));
}

}  // namespace authorgan
