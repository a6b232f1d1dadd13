#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "authorgan/harness.hpp"
#include "authorgan/spec.hpp"

namespace authorgan {

enum class JobState { queued, running, completed, failed, cancelled };

std::string_view job_state_name(JobState s);

struct JobOverrides {
  std::optional<std::int64_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> max_steps;
};

/// One training job. The worker thread is the only writer of progress and
/// metrics; readers take snapshots under the job mutex.
struct Job {
  std::string id;
  GanSpec spec;
  JobOverrides overrides;
  std::atomic<bool> cancel{false};

  mutable std::mutex mutex;
  JobState state = JobState::queued;
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  std::vector<StepRecord> metrics;
  std::optional<std::string> report_json;
  std::string error;
  std::filesystem::path output_dir;
  /// Trained model, kept for sample requests after completion.
  std::unique_ptr<ResolvedModel> model;
};

/// Bounded FIFO worker pool. At most max_workers jobs run at once; cancel is
/// cooperative and checked between steps.
class JobManager {
 public:
  JobManager(std::size_t max_workers, std::filesystem::path data_dir);
  ~JobManager();
  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;

  std::shared_ptr<Job> submit(GanSpec spec, JobOverrides overrides);
  std::shared_ptr<Job> find(const std::string& id) const;
  std::vector<std::shared_ptr<Job>> list() const;
  /// Cancels a queued job immediately or flags a running one. Returns false
  /// when the job already finished.
  bool cancel(const std::string& id);
  /// Waits for all workers to exit; queued jobs become cancelled.
  void shutdown();

  std::size_t running_count() const;
  std::size_t peak_running() const noexcept { return peak_running_.load(); }
  const std::filesystem::path& data_dir() const noexcept { return data_dir_; }

 private:
  void worker_loop();
  void run(const std::shared_ptr<Job>& job);

  std::filesystem::path data_dir_;
  mutable std::mutex mutex_;
  std::condition_variable wake_;
  std::deque<std::shared_ptr<Job>> queue_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::vector<std::string> order_;
  std::vector<std::thread> workers_;
  bool stopping_ = false;
  std::size_t running_ = 0;
  std::atomic<std::size_t> peak_running_{0};
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t max_jobs = 1;
  std::filesystem::path data_dir = ".";
  std::size_t body_limit = 1 << 20;

  /// Reads AUTHORGAN_PORT, AUTHORGAN_DATA_DIR and AUTHORGAN_MAX_JOBS over the
  /// defaults.
  static ServiceConfig from_env();
};

/// HTTP front end over a JobManager.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket; port 0 picks a free port. Returns the port.
  int bind();
  /// Serves until stop(); bind() must have succeeded.
  void serve();
  /// bind() plus serve() on a background thread.
  int start();
  void stop();

  JobManager& jobs() noexcept { return *jobs_; }

 private:
  struct Impl;
  ServiceConfig config_;
  std::unique_ptr<JobManager> jobs_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace authorgan
