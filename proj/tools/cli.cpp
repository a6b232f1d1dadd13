// authorgan command line front end. Talks to the runtime only through the C API.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "authorgan/authorgan.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct CString {
  char* p = nullptr;
  ~CString() { ag_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct SpecHandle {
  ag_spec* p = nullptr;
  ~SpecHandle() { ag_spec_destroy(p); }
};

int report_failure(ag_status status, const std::string& what) {
  std::cerr << "error: " << what << " failed (" << ag_status_name(status) << "): " << ag_last_error()
            << "\n";
  return kExitFailure;
}

void print_diagnostics(const ag_spec* spec, const std::string& file) {
  CString text;
  if (ag_spec_diagnostics_json(spec, &text.p) != AG_OK) return;
  for (const auto& d : nlohmann::json::parse(text.str())) {
    std::string where = file;
    if (d.contains("line")) {
      where += ":" + std::to_string(d["line"].get<long>()) + ":" +
               std::to_string(d["column"].get<long>());
    }
    const std::string path = d.value("path", "");
    std::cout << where << ": " << d["severity"].get<std::string>() << ": "
              << (path.empty() ? "" : path + ": ") << d["message"].get<std::string>() << "\n";
  }
}

int cmd_validate(const std::string& file, bool as_json) {
  SpecHandle spec;
  if (auto st = ag_spec_load_file(file.c_str(), &spec.p); st != AG_OK) {
    return report_failure(st, "reading " + file);
  }
  const size_t errors = ag_spec_error_count(spec.p);
  if (as_json) {
    CString text;
    ag_spec_diagnostics_json(spec.p, &text.p);
    std::cout << text.str() << "\n";
  } else {
    print_diagnostics(spec.p, file);
    std::cout << errors << (errors == 1 ? " error" : " errors");
    if (const size_t w = ag_spec_warning_count(spec.p)) {
      std::cout << ", " << w << (w == 1 ? " warning" : " warnings");
    }
    std::cout << "\n";
  }
  return errors == 0 ? kExitOk : kExitFailure;
}

struct TrainArgs {
  std::string spec;
  std::string out = "run";
  std::string data;
  long long epochs = 0;
  long long max_steps = 0;
  unsigned long long seed = 0;
  bool has_seed = false;
  size_t samples = 16;
  bool no_timing = false;
  bool quiet = false;
};

int on_step(void* user, const ag_step* s) {
  auto* quiet = static_cast<bool*>(user);
  if (!*quiet && s->step % 50 == 0) {
    std::fprintf(stderr, "epoch %lld step %lld  gen %.6g  disc %.6g\n",
                 static_cast<long long>(s->epoch), static_cast<long long>(s->step), s->gen_loss,
                 s->disc_loss);
  }
  return 0;
}

int cmd_train(TrainArgs& a) {
  SpecHandle spec;
  if (auto st = ag_spec_load_file(a.spec.c_str(), &spec.p); st != AG_OK) {
    return report_failure(st, "reading " + a.spec);
  }
  if (ag_spec_error_count(spec.p) > 0) {
    print_diagnostics(spec.p, a.spec);
    std::cout << ag_spec_error_count(spec.p) << " errors\n";
    return kExitFailure;
  }
  ag_train_options o;
  ag_train_options_init(&o);
  o.epochs = a.epochs;
  o.has_seed = a.has_seed;
  o.seed = a.seed;
  o.data_path = a.data.empty() ? nullptr : a.data.c_str();
  o.out_dir = a.out.c_str();
  o.samples = a.samples;
  o.max_steps = a.max_steps;
  o.include_timing = a.no_timing ? 0 : 1;
  o.on_step = on_step;
  o.user = &a.quiet;

  ag_report* report = nullptr;
  if (auto st = ag_train(spec.p, &o, &report); st != AG_OK) return report_failure(st, "training");
  const size_t steps = ag_report_step_count(report);
  ag_step last{};
  if (steps > 0) ag_report_step(report, steps - 1, &last);
  std::cout << "trained " << steps << " steps; final gen_loss " << last.gen_loss
            << " disc_loss " << last.disc_loss << "\n"
            << "wrote " << (std::filesystem::path(a.out) / "report.json").string() << "\n";
  ag_report_destroy(report);
  return kExitOk;
}

struct MatrixArgs {
  std::string data;
  std::string out = "matrix";
  std::string generators;
  std::string discriminators;
  long long epochs = 1;
  long long batch = 64;
  long long limit = 0;
  long long max_steps = 0;
  unsigned long long seed = 0;
};

void on_row(void*, const char* row_json) {
  const auto r = nlohmann::json::parse(row_json);
  std::fprintf(stderr, "%-8s %-8s %-7s gen %-11.6g disc %-11.6g %.3fs/epoch\n",
               r["generator"].get<std::string>().c_str(),
               r["discriminator"].get<std::string>().c_str(),
               r["status"].get<std::string>().c_str(), r.value("final_gen_loss", 0.0),
               r.value("final_disc_loss", 0.0), r.value("avg_epoch_seconds", 0.0));
}

bool write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  return static_cast<bool>(f);
}

int cmd_matrix(const MatrixArgs& a) {
  ag_matrix_options o;
  ag_matrix_options_init(&o);
  o.data_path = a.data.c_str();
  o.generators = a.generators.empty() ? nullptr : a.generators.c_str();
  o.discriminators = a.discriminators.empty() ? nullptr : a.discriminators.c_str();
  o.epochs = a.epochs;
  o.batch_size = a.batch;
  o.seed = a.seed;
  o.limit = a.limit;
  o.max_steps = a.max_steps;
  o.on_row = on_row;

  ag_matrix* m = nullptr;
  if (auto st = ag_matrix_run(&o, &m); st != AG_OK) return report_failure(st, "matrix");
  std::unique_ptr<ag_matrix, void (*)(ag_matrix*)> guard(m, ag_matrix_destroy);
  CString csv, json;
  ag_matrix_csv(m, &csv.p);
  ag_matrix_json(m, &json.p);
  std::error_code ec;
  std::filesystem::create_directories(a.out, ec);
  const auto dir = std::filesystem::path(a.out);
  if (!write_text(dir / "matrix.csv", csv.str()) || !write_text(dir / "matrix.json", json.str())) {
    std::cerr << "error: cannot write to " << a.out << "\n";
    return kExitFailure;
  }
  std::cout << ag_matrix_row_count(m) << " rows; wrote " << (dir / "matrix.csv").string() << " and "
            << (dir / "matrix.json").string() << "\n";
  return kExitOk;
}

struct ServeArgs {
  std::string host;
  std::string data_dir;
  int port = -1;
  size_t jobs = 0;
};

int cmd_serve(const ServeArgs& a) {
  // Block the shutdown signals before any thread starts so only sigwait sees them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  ag_server_config c;
  ag_server_config_init(&c);
  c.host = a.host.empty() ? nullptr : a.host.c_str();
  c.data_dir = a.data_dir.empty() ? nullptr : a.data_dir.c_str();
  c.port = a.port;
  c.max_jobs = a.jobs;
  ag_server* server = nullptr;
  if (auto st = ag_server_create(&c, &server); st != AG_OK) return report_failure(st, "serve");
  int port = 0;
  if (auto st = ag_server_start(server, &port); st != AG_OK) {
    ag_server_destroy(server);
    return report_failure(st, "serve");
  }
  std::cout << "listening on port " << port << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  std::cout << "shutting down" << std::endl;
  ag_server_stop(server);
  ag_server_destroy(server);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"authorgan: author and train GANs from JSON specs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ag_version());

  std::string validate_file;
  bool validate_json = false;
  auto* validate = app.add_subcommand("validate", "Check a spec and print diagnostics");
  validate->add_option("spec", validate_file, "spec JSON file")->required();
  validate->add_flag("--json", validate_json, "print diagnostics as JSON");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the model a spec describes");
  train->add_option("spec", ta.spec, "spec JSON file")->required();
  train->add_option("--epochs", ta.epochs, "override GAN_model.epochs")->check(CLI::PositiveNumber);
  auto* seed_opt = train->add_option("--seed", ta.seed, "override GAN_model.seed");
  train->add_option("--out", ta.out, "output directory")->capture_default_str();
  train->add_option("--data", ta.data, "override data_path (relative to the working directory)");
  train->add_option("--max-steps", ta.max_steps, "stop after N steps")->check(CLI::PositiveNumber);
  train->add_option("--samples", ta.samples, "sample grid size, 0 for none")->capture_default_str();
  train->add_flag("--no-timing", ta.no_timing, "omit wall-clock timing from report.json");
  train->add_flag("-q,--quiet", ta.quiet, "no progress output");

  MatrixArgs ma;
  auto* matrix = app.add_subcommand("matrix", "Train every generator x discriminator preset pair");
  matrix->add_option("--data", ma.data, "dataset (IDX, GFD)")->required();
  matrix->add_option("--out", ma.out, "output directory")->capture_default_str();
  matrix->add_option("--epochs", ma.epochs, "epochs per pair")->check(CLI::PositiveNumber)
      ->capture_default_str();
  matrix->add_option("--batch", ma.batch, "batch size")->check(CLI::PositiveNumber)
      ->capture_default_str();
  matrix->add_option("--seed", ma.seed, "seed")->capture_default_str();
  matrix->add_option("--limit", ma.limit, "use only the first N images")->check(CLI::PositiveNumber);
  matrix->add_option("--max-steps", ma.max_steps, "steps per pair")->check(CLI::PositiveNumber);
  matrix->add_option("--generators", ma.generators, "comma separated generator presets");
  matrix->add_option("--discriminators", ma.discriminators,
                     "comma separated discriminator presets");

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--port", sa.port, "port (default AUTHORGAN_PORT or 8080; 0 picks one)")
      ->check(CLI::Range(0, 65535));
  serve->add_option("--jobs", sa.jobs, "concurrent jobs (default AUTHORGAN_MAX_JOBS or 1)")
      ->check(CLI::PositiveNumber);
  serve->add_option("--host", sa.host, "bind address (default 127.0.0.1)");
  serve->add_option("--data-dir", sa.data_dir, "job outputs and relative data paths");

  auto* palette = app.add_subcommand("palette", "Print the layer palette JSON");
  auto* presets = app.add_subcommand("presets", "Print the preset registry JSON");
  auto* schema = app.add_subcommand("schema", "Print the spec JSON schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*validate) return cmd_validate(validate_file, validate_json);
  if (*train) {
    ta.has_seed = seed_opt->count() > 0;
    return cmd_train(ta);
  }
  if (*matrix) return cmd_matrix(ma);
  if (*serve) return cmd_serve(sa);
  if (*palette) std::cout << ag_palette_json() << "\n";
  if (*presets) std::cout << ag_presets_json() << "\n";
  if (*schema) std::cout << ag_schema_json() << "\n";
  return kExitOk;
}
