#include "authorgan/authorgan.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "authorgan/documents.hpp"
#include "authorgan/error.hpp"
#include "authorgan/harness.hpp"
#include "authorgan/service.hpp"
#include "authorgan/spec.hpp"

namespace fs = std::filesystem;
using namespace authorgan;

struct ag_spec {
  std::string base_dir;
  ParseResult parsed;
  std::vector<Diagnostic> diagnostics;  // parse + validate
};

struct ag_report {
  TrainingReport report;
};

struct ag_matrix {
  MatrixReport report;
};

struct ag_server {
  std::unique_ptr<Service> service;
};

namespace {

thread_local std::string last_error;

ag_status fail(ag_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <class F>
ag_status guarded(F&& f) {
  try {
    f();
    return AG_OK;
  } catch (const ResolveError& e) {
    return fail(AG_ERR_VALIDATION, e.what());
  } catch (const ShapeError& e) {
    return fail(AG_ERR_SHAPE, e.what());
  } catch (const ParamError& e) {
    return fail(AG_ERR_PARAM, e.what());
  } catch (const LayerError& e) {
    return fail(AG_ERR_PARAM, e.what());
  } catch (const RegistryError& e) {
    return fail(AG_ERR_REGISTRY, e.what());
  } catch (const FormatError& e) {
    return fail(AG_ERR_FORMAT, e.what());
  } catch (const IoError& e) {
    return fail(AG_ERR_IO, e.what());
  } catch (const NumericError& e) {
    return fail(AG_ERR_NUMERIC, e.what());
  } catch (const CancelledError& e) {
    return fail(AG_ERR_CANCELLED, e.what());
  } catch (const ContractError& e) {
    return fail(AG_ERR_CONTRACT, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(AG_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(AG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(AG_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(AG_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

std::string first_error(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) {
    if (d.is_error()) return (d.path.empty() ? "/" : d.path) + ": " + d.message;
  }
  return "invalid spec";
}

ag_spec* make_spec(std::string_view text, std::string base_dir) {
  auto spec = std::make_unique<ag_spec>();
  spec->base_dir = std::move(base_dir);
  spec->parsed = parse_spec(text);
  spec->diagnostics = spec->parsed.diagnostics;
  if (spec->parsed.ok()) {
    auto more = validate(*spec->parsed.spec);
    spec->diagnostics.insert(spec->diagnostics.end(), more.begin(), more.end());
  }
  return spec.release();
}

std::vector<std::string> split_names(const char* list, const std::vector<std::string>& fallback) {
  if (!list || !*list) return fallback;
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto& known = preset_names();
    if (std::find(known.begin(), known.end(), item) == known.end()) {
      throw RegistryError("unknown preset '" + item + "'");
    }
    out.push_back(item);
  }
  if (out.empty()) throw ContractError("empty name list");
  return out;
}

Dataset first_n(const Dataset& ds, std::size_t n) {
  if (n == 0 || n >= ds.size()) return ds;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Batch b = gather_batch(ds, idx);
  Dataset out;
  out.images = std::move(b.images);
  out.labels = std::move(b.labels);
  out.source_path = ds.source_path;
  out.data_shape = ds.data_shape;
  return out;
}

}  // namespace

extern "C" {

const char* ag_version(void) { return "0.1.0"; }

const char* ag_status_name(ag_status status) {
  switch (status) {
    case AG_OK: return "ok";
    case AG_ERR_ARGUMENT: return "argument";
    case AG_ERR_VALIDATION: return "validation";
    case AG_ERR_SHAPE: return "shape";
    case AG_ERR_PARAM: return "param";
    case AG_ERR_REGISTRY: return "registry";
    case AG_ERR_FORMAT: return "format";
    case AG_ERR_IO: return "io";
    case AG_ERR_NUMERIC: return "numeric";
    case AG_ERR_CANCELLED: return "cancelled";
    case AG_ERR_CONTRACT: return "contract";
    case AG_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ag_last_error(void) { return last_error.c_str(); }

void ag_free(char* s) { std::free(s); }

const char* ag_palette_json(void) { return palette_json().c_str(); }
const char* ag_presets_json(void) { return presets_json().c_str(); }
const char* ag_schema_json(void) { return spec_schema_json().c_str(); }

// --- specs -------------------------------------------------------------------

ag_status ag_spec_parse(const char* text, size_t len, const char* base_dir, ag_spec** out) {
  if (!text || !out) return fail(AG_ERR_ARGUMENT, "text and out must not be null");
  return guarded([&] { *out = make_spec({text, len}, base_dir ? base_dir : ""); });
}

ag_status ag_spec_load_file(const char* path, ag_spec** out) {
  if (!path || !out) return fail(AG_ERR_ARGUMENT, "path and out must not be null");
  return guarded([&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(std::string("cannot read ") + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    *out = make_spec(ss.str(), fs::path(path).parent_path().string());
  });
}

void ag_spec_destroy(ag_spec* spec) { delete spec; }

size_t ag_spec_error_count(const ag_spec* spec) {
  return spec ? error_count(spec->diagnostics) : 0;
}

size_t ag_spec_warning_count(const ag_spec* spec) {
  return spec ? spec->diagnostics.size() - error_count(spec->diagnostics) : 0;
}

ag_status ag_spec_diagnostics_json(const ag_spec* spec, char** out) {
  if (!spec || !out) return fail(AG_ERR_ARGUMENT, "spec and out must not be null");
  return guarded([&] { *out = dup_string(diagnostics_json(spec->diagnostics)); });
}

ag_status ag_spec_to_json(const ag_spec* spec, char** out) {
  if (!spec || !out) return fail(AG_ERR_ARGUMENT, "spec and out must not be null");
  if (!spec->parsed.ok()) return fail(AG_ERR_VALIDATION, first_error(spec->diagnostics));
  return guarded([&] { *out = dup_string(serialize_spec(*spec->parsed.spec)); });
}

// --- training ----------------------------------------------------------------

void ag_train_options_init(ag_train_options* o) {
  if (!o) return;
  *o = ag_train_options{};
  o->samples = 16;
  o->include_timing = 1;
}

ag_status ag_train(const ag_spec* spec, const ag_train_options* options, ag_report** out) {
  if (!spec || !out) return fail(AG_ERR_ARGUMENT, "spec and out must not be null");
  ag_train_options o;
  ag_train_options_init(&o);
  if (options) o = *options;
  if (o.epochs < 0) return fail(AG_ERR_ARGUMENT, "epochs must be >= 0");
  if (o.max_steps < 0) return fail(AG_ERR_ARGUMENT, "max_steps must be >= 0");
  if (error_count(spec->diagnostics) > 0) {
    return fail(AG_ERR_VALIDATION, first_error(spec->diagnostics));
  }
  return guarded([&] {
    GanSpec s = *spec->parsed.spec;
    if (o.epochs > 0) s.gan_model.epochs = o.epochs;
    if (o.has_seed) s.gan_model.seed = o.seed;

    // An explicit data path comes from the caller's directory and drops the
    // spec's labels path, leaving label discovery to the loader.
    Dataset ds = o.data_path ? load_dataset(o.data_path, std::nullopt, fs::current_path())
                             : load_dataset(s.data_path, s.labels_path, spec->base_dir);
    ResolvedModel model = resolve(s, ds.data_shape);

    std::atomic<bool> cancel{false};
    TrainOptions t;
    if (o.max_steps > 0) t.max_steps = o.max_steps;
    t.cancel = &cancel;
    if (o.on_step) {
      t.on_step = [&](const StepRecord& r) {
        const ag_step step{r.step, r.epoch, r.gen_loss, r.disc_loss};
        if (o.on_step(o.user, &step) != 0) cancel = true;
      };
    }
    auto report = std::make_unique<ag_report>();
    report->report = train(model, ds, s.gan_model.epochs, t);
    if (o.out_dir) {
      write_run_outputs(o.out_dir, model, report->report, o.samples, o.include_timing != 0);
    }
    *out = report.release();
  });
}

void ag_report_destroy(ag_report* report) { delete report; }

size_t ag_report_step_count(const ag_report* report) {
  return report ? report->report.steps.size() : 0;
}

ag_status ag_report_step(const ag_report* report, size_t index, ag_step* out) {
  if (!report || !out) return fail(AG_ERR_ARGUMENT, "report and out must not be null");
  if (index >= report->report.steps.size()) return fail(AG_ERR_ARGUMENT, "step index out of range");
  const auto& r = report->report.steps[index];
  *out = ag_step{r.step, r.epoch, r.gen_loss, r.disc_loss};
  return AG_OK;
}

double ag_report_average_epoch_seconds(const ag_report* report) {
  return report ? report->report.average_epoch_seconds() : 0.0;
}

ag_status ag_report_json(const ag_report* report, int include_timing, char** out) {
  if (!report || !out) return fail(AG_ERR_ARGUMENT, "report and out must not be null");
  return guarded([&] { *out = dup_string(report_json(report->report, include_timing != 0)); });
}

// --- matrix ------------------------------------------------------------------

void ag_matrix_options_init(ag_matrix_options* o) {
  if (!o) return;
  *o = ag_matrix_options{};
  o->epochs = 1;
  o->batch_size = 64;
  o->latent_dim = 100;
}

ag_status ag_matrix_run(const ag_matrix_options* options, ag_matrix** out) {
  if (!options || !out) return fail(AG_ERR_ARGUMENT, "options and out must not be null");
  if (!options->data_path) return fail(AG_ERR_ARGUMENT, "data_path is required");
  if (options->epochs < 1 || options->batch_size < 1 || options->latent_dim < 1 ||
      options->limit < 0 || options->max_steps < 0) {
    return fail(AG_ERR_ARGUMENT, "epochs, batch_size and latent_dim must be >= 1");
  }
  return guarded([&] {
    const auto gens = split_names(options->generators, matrix_generators());
    const auto discs = split_names(options->discriminators, matrix_discriminators());
    const Dataset ds = first_n(load_dataset(options->data_path, std::nullopt, fs::current_path()),
                               static_cast<std::size_t>(options->limit));
    MatrixOptions m;
    m.epochs = options->epochs;
    m.batch_size = options->batch_size;
    m.seed = options->seed;
    m.latent_dim = options->latent_dim;
    if (options->max_steps > 0) m.max_steps = options->max_steps;
    if (options->on_row) {
      m.on_row = [&](const MatrixRow& r) {
        MatrixReport one{{r}};
        const auto doc = nlohmann::json::parse(matrix_json(one));
        options->on_row(options->user, doc["rows"][0].dump().c_str());
      };
    }
    auto matrix = std::make_unique<ag_matrix>();
    matrix->report = run_matrix(gens, discs, ds, m);
    *out = matrix.release();
  });
}

void ag_matrix_destroy(ag_matrix* matrix) { delete matrix; }

size_t ag_matrix_row_count(const ag_matrix* matrix) {
  return matrix ? matrix->report.rows.size() : 0;
}

ag_status ag_matrix_csv(const ag_matrix* matrix, char** out) {
  if (!matrix || !out) return fail(AG_ERR_ARGUMENT, "matrix and out must not be null");
  return guarded([&] { *out = dup_string(matrix_csv(matrix->report)); });
}

ag_status ag_matrix_json(const ag_matrix* matrix, char** out) {
  if (!matrix || !out) return fail(AG_ERR_ARGUMENT, "matrix and out must not be null");
  return guarded([&] { *out = dup_string(matrix_json(matrix->report)); });
}

// --- server ------------------------------------------------------------------

void ag_server_config_init(ag_server_config* c) {
  if (!c) return;
  *c = ag_server_config{};
  c->port = -1;
}

ag_status ag_server_create(const ag_server_config* config, ag_server** out) {
  if (!out) return fail(AG_ERR_ARGUMENT, "out must not be null");
  ag_server_config c;
  ag_server_config_init(&c);
  if (config) c = *config;
  if (c.port < -1 || c.port > 65535) return fail(AG_ERR_ARGUMENT, "port out of range");
  return guarded([&] {
    ServiceConfig sc = ServiceConfig::from_env();
    if (c.host) sc.host = c.host;
    if (c.port >= 0) sc.port = c.port;
    if (c.max_jobs > 0) sc.max_jobs = c.max_jobs;
    if (c.data_dir) sc.data_dir = c.data_dir;
    if (c.body_limit > 0) sc.body_limit = c.body_limit;
    auto server = std::make_unique<ag_server>();
    server->service = std::make_unique<Service>(sc);
    *out = server.release();
  });
}

ag_status ag_server_start(ag_server* server, int* port) {
  if (!server) return fail(AG_ERR_ARGUMENT, "server must not be null");
  return guarded([&] {
    const int p = server->service->start();
    if (port) *port = p;
  });
}

ag_status ag_server_listen(ag_server* server) {
  if (!server) return fail(AG_ERR_ARGUMENT, "server must not be null");
  return guarded([&] { server->service->serve(); });
}

ag_status ag_server_stop(ag_server* server) {
  if (!server) return fail(AG_ERR_ARGUMENT, "server must not be null");
  return guarded([&] { server->service->stop(); });
}

void ag_server_destroy(ag_server* server) { delete server; }

}  // extern "C"
