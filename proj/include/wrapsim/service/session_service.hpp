#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wrapsim/learner/ensemble.hpp"
#include "wrapsim/teaching/session.hpp"

namespace wrapsim::service {

using teaching::Event;

/// Seconds on a monotonic clock.
using Clock = std::function<double()>;

Clock steady_clock();

struct ServiceConfig {
  /// Per-session JSONL logs live here; nothing is persisted when empty.
  std::optional<std::filesystem::path> data_dir;
  learner::TrainConfig train;
  double frame_interval = 0.05;  ///< s; frames are throttled to this spacing
  double rt_tolerance = 5.0;     ///< s; larger client/server rt gaps are flagged
};

/// Reads the data directory from WRAPSIM_DATA_DIR, if set.
std::optional<std::filesystem::path> data_dir_from_env();

/// Session and experiment logic behind the HTTP API. Requests and replies
/// are the JSON bodies of the endpoints. Every entity keeps an append-only
/// event log; state is always what replaying that log gives. Thread-safe.
class SessionService {
 public:
  explicit SessionService(ServiceConfig config = {}, Clock clock = steady_clock());
  ~SessionService();

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  /// {task, feedback, seed, client_token?} -> session handle.
  nlohmann::json create_session(const nlohmann::json& request);
  nlohmann::json session(const std::string& id) const;
  /// {phase, client_token?}: moves the session forward.
  nlohmann::json set_phase(const std::string& id, const nlohmann::json& request);
  /// {samples: [{t, x, y, theta, z?}], client_token?} -> one ack per sample.
  nlohmann::json add_samples(const std::string& id, const nlohmann::json& request);
  nlohmann::json metrics(const std::string& id);

  /// {kind: "pair"|"triplet", seed, order?, client_token?}
  nlohmann::json create_experiment(const nlohmann::json& request);
  /// The pending trial (presented now) or {done: true}.
  nlohmann::json next_trial(const std::string& id);
  /// {trial_id, answer, rt, client_token?}
  nlohmann::json submit_response(const std::string& id, const nlohmann::json& request);

  /// "csv" or "jsonl" text of a session or experiment.
  std::string export_log(const std::string& id, const std::string& format) const;
  std::vector<Event> events(const std::string& id) const;

  using FrameListener = std::function<void(const std::string& frame_json)>;
  /// Frames rendered for the session from now on are passed to `listener`
  /// (outside any service lock). Returns a handle for unsubscribe.
  std::uint64_t subscribe(const std::string& id, FrameListener listener);
  void unsubscribe(const std::string& id, std::uint64_t handle);

  std::vector<std::string> session_ids() const;
  std::vector<std::string> experiment_ids() const;

 private:
  struct Session;
  struct Experiment;

  std::shared_ptr<Session> find_session(const std::string& id) const;
  std::shared_ptr<Experiment> find_experiment(const std::string& id) const;
  std::shared_ptr<const learner::EnsembleModel> model_for(const std::string& task,
                                                          std::uint64_t seed);
  void load();
  std::string next_id(char prefix);

  ServiceConfig config_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::shared_ptr<Experiment>> experiments_;
  std::map<std::string, nlohmann::json> create_tokens_;
  std::map<std::pair<std::string, std::uint64_t>,
           std::shared_future<std::shared_ptr<const learner::EnsembleModel>>>
      models_;
  std::uint64_t counter_ = 0;
  std::uint64_t listener_counter_ = 0;
};

/// HTTP status for an error thrown by the service.
int http_status(const std::exception& error);

}  // namespace wrapsim::service
