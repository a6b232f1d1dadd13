#include "authorgan/service.hpp"

#include <cstdio>
#include <cstdlib>
#include <random>

#include <httplib.h>
#include <json.hpp>

#include "authorgan/documents.hpp"
#include "authorgan/error.hpp"

namespace authorgan {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view job_state_name(JobState s) {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::completed: return "completed";
    case JobState::failed: return "failed";
    case JobState::cancelled: return "cancelled";
  }
  return "unknown";
}

namespace {

std::string new_job_id() {
  static std::mutex m;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(m);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(gen()));
  return buf;
}

bool terminal(JobState s) {
  return s == JobState::completed || s == JobState::failed || s == JobState::cancelled;
}

}  // namespace

JobManager::JobManager(std::size_t max_workers, fs::path data_dir)
    : data_dir_(std::move(data_dir)) {
  if (max_workers < 1) max_workers = 1;
  for (std::size_t i = 0; i < max_workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

JobManager::~JobManager() { shutdown(); }

void JobManager::shutdown() {
  std::deque<std::shared_ptr<Job>> dropped;
  {
    std::lock_guard lock(mutex_);
    if (stopping_ && workers_.empty()) return;
    stopping_ = true;
    dropped.swap(queue_);
    for (auto& [id, job] : jobs_) job->cancel = true;
  }
  for (auto& job : dropped) {
    std::lock_guard jl(job->mutex);
    job->state = JobState::cancelled;
  }
  wake_.notify_all();
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
  workers_.clear();
}

std::shared_ptr<Job> JobManager::submit(GanSpec spec, JobOverrides overrides) {
  auto job = std::make_shared<Job>();
  job->spec = std::move(spec);
  job->overrides = overrides;
  {
    std::lock_guard lock(mutex_);
    if (stopping_) throw ContractError("the job manager is shutting down");
    do {
      job->id = new_job_id();
    } while (jobs_.count(job->id));
    job->output_dir = data_dir_ / "jobs" / job->id;
    jobs_[job->id] = job;
    order_.push_back(job->id);
    queue_.push_back(job);
  }
  wake_.notify_one();
  return job;
}

std::shared_ptr<Job> JobManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(id);
  return it == jobs_.end() ? nullptr : it->second;
}

std::vector<std::shared_ptr<Job>> JobManager::list() const {
  std::lock_guard lock(mutex_);
  std::vector<std::shared_ptr<Job>> out;
  for (const auto& id : order_) out.push_back(jobs_.at(id));
  return out;
}

bool JobManager::cancel(const std::string& id) {
  std::shared_ptr<Job> job;
  {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return false;
    job = it->second;
    auto q = std::find(queue_.begin(), queue_.end(), job);
    if (q != queue_.end()) {
      queue_.erase(q);
      std::lock_guard jl(job->mutex);
      job->state = JobState::cancelled;
      return true;
    }
  }
  std::lock_guard jl(job->mutex);
  if (terminal(job->state)) return job->state == JobState::cancelled;
  job->cancel = true;
  return true;
}

std::size_t JobManager::running_count() const {
  std::lock_guard lock(mutex_);
  return running_;
}

void JobManager::worker_loop() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job = queue_.front();
      queue_.pop_front();
      ++running_;
      std::size_t peak = peak_running_.load();
      while (running_ > peak && !peak_running_.compare_exchange_weak(peak, running_)) {
      }
    }
    run(job);
    {
      std::lock_guard lock(mutex_);
      --running_;
    }
  }
}

void JobManager::run(const std::shared_ptr<Job>& job) {
  {
    std::lock_guard jl(job->mutex);
    if (job->cancel) {
      job->state = JobState::cancelled;
      return;
    }
    job->state = JobState::running;
  }
  try {
    GanSpec spec = job->spec;
    if (job->overrides.epochs) spec.gan_model.epochs = *job->overrides.epochs;
    if (job->overrides.seed) spec.gan_model.seed = *job->overrides.seed;
    Dataset ds = load_dataset(spec.data_path, spec.labels_path, data_dir_);
    auto model = std::make_unique<ResolvedModel>(resolve(spec, ds.data_shape));

    TrainOptions options;
    options.max_steps = job->overrides.max_steps;
    options.cancel = &job->cancel;
    options.on_step = [&job](const StepRecord& s) {
      std::lock_guard jl(job->mutex);
      job->metrics.push_back(s);
      job->epoch = s.epoch;
      job->step = s.step;
    };
    TrainingReport report = train(*model, ds, spec.gan_model.epochs, options);

    write_run_outputs(job->output_dir, *model, report);
    std::string doc = report_json(report);

    std::lock_guard jl(job->mutex);
    job->report_json = std::move(doc);
    job->model = std::move(model);
    job->state = JobState::completed;
  } catch (const CancelledError&) {
    std::lock_guard jl(job->mutex);
    job->state = JobState::cancelled;
  } catch (const std::exception& e) {
    std::lock_guard jl(job->mutex);
    job->state = JobState::failed;
    job->error = e.what();
  }
}

// --- HTTP --------------------------------------------------------------------

ServiceConfig ServiceConfig::from_env() {
  ServiceConfig c;
  if (const char* p = std::getenv("AUTHORGAN_PORT"); p && *p) c.port = std::atoi(p);
  if (const char* d = std::getenv("AUTHORGAN_DATA_DIR"); d && *d) c.data_dir = d;
  if (const char* j = std::getenv("AUTHORGAN_MAX_JOBS"); j && *j) {
    const long v = std::atol(j);
    if (v > 0) c.max_jobs = static_cast<std::size_t>(v);
  }
  return c;
}

struct Service::Impl {
  httplib::Server server;
  std::thread thread;
  int port = -1;
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

void send_document(const httplib::Request& req, httplib::Response& res, const std::string& doc) {
  char tag[24];
  std::snprintf(tag, sizeof tag, "\"%016llx\"", static_cast<unsigned long long>(fnv1a64(doc)));
  res.set_header("ETag", tag);
  res.set_header("Cache-Control", "no-cache");
  if (req.has_header("If-None-Match") && req.get_header_value("If-None-Match") == tag) {
    res.status = 304;
    return;
  }
  res.status = 200;
  res.set_content(doc, "application/json");
}

json job_view(const Job& job) {
  std::lock_guard jl(job.mutex);
  json j = {{"id", job.id},
            {"state", job_state_name(job.state)},
            {"progress", {{"epoch", job.epoch}, {"step", job.step}}},
            {"generator", job.spec.generator.choice.value_or("custom")},
            {"discriminator", job.spec.discriminator.choice.value_or("custom")},
            {"metrics_count", job.metrics.size()}};
  if (!job.error.empty()) j["error"] = job.error;
  if (job.report_json) j["report"] = json::parse(*job.report_json);
  return j;
}

std::optional<std::int64_t> query_int(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  const std::string v = req.get_param_value(key);
  char* end = nullptr;
  const long long n = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0') throw ContractError(std::string(key) + " must be an integer");
  return n;
}

}  // namespace

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      jobs_(std::make_unique<JobManager>(config_.max_jobs, config_.data_dir)),
      impl_(std::make_unique<Impl>()) {
  auto& srv = impl_->server;
  srv.set_payload_max_length(config_.body_limit);
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, If-None-Match");
    res.status = 204;
  });

  srv.Get("/palette", [](const httplib::Request& req, httplib::Response& res) {
    send_document(req, res, palette_json());
  });
  srv.Get("/presets", [](const httplib::Request& req, httplib::Response& res) {
    send_document(req, res, presets_json());
  });
  srv.Get("/schema", [](const httplib::Request& req, httplib::Response& res) {
    send_document(req, res, spec_schema_json());
  });

  srv.Post("/specs/validate", [](const httplib::Request& req, httplib::Response& res) {
    const auto diags = check_spec(req.body);
    send_json(res, 200,
              {{"valid", error_count(diags) == 0},
               {"error_count", error_count(diags)},
               {"diagnostics", json::parse(diagnostics_json(diags))}});
  });

  srv.Post("/jobs", [this](const httplib::Request& req, httplib::Response& res) {
    // Either a bare spec or {"spec": {...}, "overrides": {...}}.
    std::string spec_text = req.body;
    JobOverrides overrides;
    try {
      json body = json::parse(req.body);
      if (body.is_object() && body.contains("spec") && body["spec"].is_object()) {
        spec_text = body["spec"].dump();
        if (body.contains("overrides")) {
          const json& o = body["overrides"];
          if (!o.is_object()) throw ContractError("overrides must be an object");
          for (const auto& [key, v] : o.items()) {
            if (key != "epochs" && key != "seed" && key != "max_steps") {
              throw ContractError("unknown override '" + key +
                                  "' (allowed: epochs, seed, max_steps)");
            }
            if (!v.is_number_integer() || (key != "seed" && v.get<std::int64_t>() < 1) ||
                (key == "seed" && v.is_number_integer() && !v.is_number_unsigned() &&
                 v.get<std::int64_t>() < 0)) {
              throw ContractError("override " + key + " must be a positive integer");
            }
          }
          if (o.contains("epochs")) overrides.epochs = o["epochs"].get<std::int64_t>();
          if (o.contains("seed")) overrides.seed = o["seed"].get<std::uint64_t>();
          if (o.contains("max_steps")) overrides.max_steps = o["max_steps"].get<std::int64_t>();
        }
      }
    } catch (const json::exception&) {
      // fall through: parse_spec reports the syntax error
    } catch (const ContractError& e) {
      send_json(res, 422,
                {{"diagnostics",
                  {{{"severity", "error"}, {"path", "/overrides"}, {"message", e.what()}}}}});
      return;
    }
    ParseResult parsed = parse_spec(spec_text);
    auto diags = parsed.diagnostics;
    if (parsed.ok()) {
      auto more = validate(*parsed.spec);
      diags.insert(diags.end(), more.begin(), more.end());
    }
    if (!parsed.ok() || error_count(diags) > 0) {
      send_json(res, 422, {{"diagnostics", json::parse(diagnostics_json(diags))}});
      return;
    }
    auto job = jobs_->submit(std::move(*parsed.spec), overrides);
    res.set_header("Location", "/jobs/" + job->id);
    send_json(res, 202, {{"job_id", job->id}, {"state", "queued"}});
  });

  srv.Get("/jobs", [this](const httplib::Request&, httplib::Response& res) {
    json arr = json::array();
    for (const auto& job : jobs_->list()) {
      std::lock_guard jl(job->mutex);
      arr.push_back({{"id", job->id}, {"state", job_state_name(job->state)}});
    }
    send_json(res, 200, {{"jobs", arr}});
  });

  srv.Get(R"(/jobs/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto job = jobs_->find(req.matches[1]);
    if (!job) return send_error(res, 404, "no job " + std::string(req.matches[1]));
    send_json(res, 200, job_view(*job));
  });

  srv.Get(R"(/jobs/([0-9a-f]+)/metrics)",
          [this](const httplib::Request& req, httplib::Response& res) {
            auto job = jobs_->find(req.matches[1]);
            if (!job) return send_error(res, 404, "no job " + std::string(req.matches[1]));
            std::int64_t since = 0;
            try {
              since = query_int(req, "since").value_or(0);
            } catch (const ContractError& e) {
              return send_error(res, 400, e.what());
            }
            json rows = json::array();
            std::int64_t last = since;
            std::string state;
            {
              std::lock_guard jl(job->mutex);
              // steps are 1-based and stored in order
              const auto begin = static_cast<std::size_t>(std::max<std::int64_t>(since, 0));
              for (std::size_t i = begin; i < job->metrics.size(); ++i) {
                const auto& s = job->metrics[i];
                rows.push_back({{"step", s.step},
                                {"epoch", s.epoch},
                                {"gen_loss", s.gen_loss},
                                {"disc_loss", s.disc_loss}});
                last = s.step;
              }
              state = job_state_name(job->state);
            }
            send_json(res, 200, {{"rows", rows}, {"next", last}, {"state", state}});
          });

  srv.Get(R"(/jobs/([0-9a-f]+)/samples)",
          [this](const httplib::Request& req, httplib::Response& res) {
            auto job = jobs_->find(req.matches[1]);
            if (!job) return send_error(res, 404, "no job " + std::string(req.matches[1]));
            std::int64_t n = 16;
            try {
              n = query_int(req, "n").value_or(16);
            } catch (const ContractError& e) {
              return send_error(res, 400, e.what());
            }
            if (n < 1 || n > 1024) return send_error(res, 400, "n must be in [1, 1024]");
            std::lock_guard jl(job->mutex);
            if (job->state != JobState::completed || !job->model) {
              return send_error(res, 409, "samples are available once the job has completed");
            }
            try {
              RngStream rng = role_stream(job->model->seed, StreamRole::sampling);
              const ImageGrid grid = sample_grid(*job->model, static_cast<std::size_t>(n), rng);
              res.status = 200;
              res.set_content(encode_pnm(grid), grid.channels == 3 ? "image/x-portable-pixmap"
                                                                   : "image/x-portable-graymap");
            } catch (const ContractError& e) {
              send_error(res, 409, e.what());
            }
          });

  srv.Delete(R"(/jobs/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto job = jobs_->find(req.matches[1]);
    if (!job) return send_error(res, 404, "no job " + std::string(req.matches[1]));
    const bool ok = jobs_->cancel(job->id);
    std::string state;
    {
      std::lock_guard jl(job->mutex);
      state = job_state_name(job->state);
    }
    if (!ok) return send_json(res, 409, {{"id", job->id}, {"state", state},
                                         {"error", "job already finished"}});
    send_json(res, 202, {{"id", job->id}, {"state", state}, {"cancel_requested", true}});
  });

  srv.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          send_error(res, 500, e.what());
        } catch (...) {
          send_error(res, 500, "internal error");
        }
      });
}

Service::~Service() { stop(); }

int Service::bind() {
  if (impl_->port > 0) return impl_->port;
  auto& srv = impl_->server;
  if (config_.port == 0) {
    impl_->port = srv.bind_to_any_port(config_.host);
  } else if (srv.bind_to_port(config_.host, config_.port)) {
    impl_->port = config_.port;
  }
  if (impl_->port <= 0) {
    throw IoError("cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  return impl_->port;
}

void Service::serve() {
  if (impl_->port <= 0) bind();
  impl_->server.listen_after_bind();
}

int Service::start() {
  const int port = bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  jobs_->shutdown();
}

}  // namespace authorgan
