#include "wrapsim/service/session_service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "wrapsim/display.hpp"
#include "wrapsim/error.hpp"
#include "wrapsim/learner/learner.hpp"
#include "wrapsim/pneumatics.hpp"
#include "wrapsim/psychophysics/analysis.hpp"
#include "wrapsim/psychophysics/io.hpp"
#include "wrapsim/psychophysics/protocol.hpp"
#include "wrapsim/teaching/metrics.hpp"

namespace wrapsim::service {

using nlohmann::json;
using teaching::SessionPhase;

Clock steady_clock() {
  const auto origin = std::chrono::steady_clock::now();
  return [origin] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin).count();
  };
}

std::optional<std::filesystem::path> data_dir_from_env() {
  const char* dir = std::getenv("WRAPSIM_DATA_DIR");
  if (dir == nullptr || *dir == '\0') return std::nullopt;
  return std::filesystem::path(dir);
}

int http_status(const std::exception& error) {
  if (dynamic_cast<const NotFound*>(&error)) return 404;
  if (dynamic_cast<const StateError*>(&error)) return 409;
  if (dynamic_cast<const InvalidInput*>(&error) || dynamic_cast<const InvalidParameter*>(&error) ||
      dynamic_cast<const ConfigurationError*>(&error) ||
      dynamic_cast<const json::exception*>(&error)) {
    return 400;
  }
  return 500;
}

namespace {

/// Append-only JSONL writer; a no-op without a file.
class LogFile {
 public:
  LogFile() = default;
  explicit LogFile(const std::filesystem::path& path) : out_(path, std::ios::app) {
    if (!out_) throw ConfigurationError("cannot open log " + path.string());
  }
  void write(const Event& e) {
    if (!out_.is_open()) return;
    out_ << json(e).dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

std::vector<Event> read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      events.push_back(json::parse(line).get<Event>());
    } catch (const json::exception& e) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return events;
}

std::optional<std::string> token_of(const json& request) {
  if (request.contains("client_token") && request["client_token"].is_string()) {
    return request["client_token"].get<std::string>();
  }
  return std::nullopt;
}

void attach_token(json& payload, const std::optional<std::string>& token) {
  if (token) payload["client_token"] = *token;
}

double require_finite(const json& j, const char* key) {
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) throw InvalidInput(std::string(key) + " must be finite");
  return v;
}

}  // namespace

struct SessionService::Session {
  std::mutex mutex;
  std::string id;
  teaching::TaskSpec task;
  teaching::FeedbackMode feedback = teaching::FeedbackMode::None;
  std::uint64_t seed = 0;
  double created_at = 0.0;
  SessionPhase phase = SessionPhase::Idle;
  std::vector<Event> events;
  std::optional<learner::UncertaintySchedule> schedule;
  std::optional<display::Layout> layout;
  std::optional<double> last_t;
  double next_frame = -std::numeric_limits<double>::infinity();
  std::map<std::string, json> tokens;
  std::optional<teaching::Metrics> metrics;
  std::map<std::uint64_t, FrameListener> listeners;
  LogFile log;

  json handle() const {
    return {{"id", id},
            {"task", task.name},
            {"mode", teaching::to_string(feedback)},
            {"seed", seed},
            {"status", teaching::to_string(phase)},
            {"created_at", created_at},
            {"events", events.size()}};
  }

  std::size_t channels() const { return task.is_welding() ? 3 : 1; }

  /// Applies one event to the in-memory state (live or on replay).
  void apply(const Event& e, double frame_interval) {
    const auto token = token_of(e.payload);
    if (e.type == "session_created") {
      task = teaching::make_task(e.payload.at("task").get<std::string>());
      feedback = teaching::feedback_mode_from_string(e.payload.at("feedback").get<std::string>());
      seed = e.payload.at("seed").get<std::uint64_t>();
      created_at = e.payload.value("created_at", 0.0);
      if (e.payload.contains("schedule")) {
        schedule = e.payload["schedule"].get<learner::UncertaintySchedule>();
      }
      layout = teaching::feedback_layout(feedback, channels());
    } else if (e.type == "phase_change") {
      phase = teaching::session_phase_from_string(e.payload.at("phase").get<std::string>());
    } else if (e.type == "demo_sample") {
      last_t = e.t;
      if (token) tokens[*token]["acks"].push_back({{"seq", e.seq}, {"t", e.t}});
    } else if (e.type == "frame") {
      next_frame = e.t + frame_interval;
      if (token) tokens[*token]["frames"] = tokens[*token].value("frames", 0) + 1;
    } else if (e.type == "metric") {
      metrics = e.payload.at("metrics").get<teaching::Metrics>();
    }
    events.push_back(e);
    if (token && (e.type == "session_created" || e.type == "phase_change")) {
      tokens[*token] = handle();
    }
  }

  const Event& append(std::string type, double t, json payload, double frame_interval) {
    Event e{events.size(), t, std::move(type), std::move(payload)};
    apply(e, frame_interval);
    log.write(e);
    return events.back();
  }
};

struct SessionService::Experiment {
  std::mutex mutex;
  std::string id;
  std::string kind;
  std::uint64_t seed = 0;
  psychophysics::MethodOrder order = psychophysics::MethodOrder::LocalFirst;
  std::optional<psychophysics::PairProtocol> pair;
  std::optional<psychophysics::TripletProtocol> triplet;
  std::vector<Event> events;
  std::map<std::size_t, double> green;  // trial -> server time of steady state
  std::vector<psychophysics::PairResponse> pair_responses;
  std::vector<psychophysics::TripletResponse> triplet_responses;
  std::map<std::string, json> tokens;
  LogFile log;

  std::size_t total() const { return pair ? pair->trials.size() : triplet->trials.size(); }
  std::size_t answered() const { return pair_responses.size() + triplet_responses.size(); }

  json summary() const {
    json j = {{"id", id},
              {"kind", kind},
              {"seed", seed},
              {"trials", total()},
              {"answered", answered()}};
    if (triplet) j["order"] = psychophysics::to_string(order);
    return j;
  }

  /// Time for the display to reach the trial's stimulus from rest.
  double settle(std::size_t trial_id) const {
    using pneumatics::ChannelSpec;
    auto from_rest = [](const ChannelSpec& spec, double p) {
      return p == display::kMinRenderPressure
                 ? 0.0
                 : pneumatics::settle_time(spec, display::kMinRenderPressure, p);
    };
    if (pair) return from_rest(ChannelSpec::sleeve(), pair->trial(trial_id).first());
    double worst = 0.0;
    for (double p : triplet->trial(trial_id).pressures) {
      worst = std::max(worst, from_rest(ChannelSpec::ring(), p));
    }
    return worst;
  }

  json stimulus(std::size_t trial_id) const {
    if (pair) {
      const auto& t = pair->trial(trial_id);
      return {{"first", t.first()}, {"second", t.second()}};
    }
    const auto& t = triplet->trial(trial_id);
    return {{"method", psychophysics::to_string(t.method)}, {"pressures", t.pressures}};
  }

  json response_reply(const Event& e) const {
    json j = {{"seq", e.seq},
              {"trial_id", e.payload.at("trial_id")},
              {"correct", e.payload.at("correct")},
              {"flagged", e.payload.at("flagged")},
              {"server_rt", e.payload.at("server_rt")},
              {"remaining", total() - answered()},
              {"done", answered() == total()}};
    return j;
  }

  void apply(const Event& e) {
    const auto token = token_of(e.payload);
    if (e.type == "experiment_created") {
      kind = e.payload.at("kind").get<std::string>();
      seed = e.payload.at("seed").get<std::uint64_t>();
      if (kind == "pair") {
        pair = psychophysics::generate_pair_protocol(seed);
      } else if (kind == "triplet") {
        order = psychophysics::method_order_from_string(e.payload.value("order", "local_first"));
        triplet = psychophysics::generate_triplet_protocol(seed, order);
      } else {
        throw InvalidInput("unknown experiment kind '" + kind + "'");
      }
    } else if (e.type == "trial") {
      green[e.payload.at("trial_id").get<std::size_t>()] = e.payload.at("green_at").get<double>();
    } else if (e.type == "response") {
      const auto trial_id = e.payload.at("trial_id").get<std::size_t>();
      const double rt = e.payload.at("rt").get<double>();
      if (pair) {
        pair_responses.push_back(
            psychophysics::score(pair->trial(trial_id), e.payload.at("answer").get<int>(), rt));
      } else {
        triplet_responses.push_back(psychophysics::score(
            triplet->trial(trial_id),
            psychophysics::channel_from_string(e.payload.at("answer").get<std::string>()), rt));
      }
    }
    events.push_back(e);
    if (token) {
      if (e.type == "experiment_created") tokens[*token] = summary();
      if (e.type == "response") tokens[*token] = response_reply(e);
    }
  }

  const Event& append(std::string type, double t, json payload) {
    Event e{events.size(), t, std::move(type), std::move(payload)};
    apply(e);
    log.write(e);
    return events.back();
  }
};

SessionService::SessionService(ServiceConfig config, Clock clock)
    : config_(std::move(config)), clock_(std::move(clock)) {
  if (!(config_.frame_interval > 0.0)) throw InvalidParameter("frame interval must be positive");
  config_.train.validate();
  load();
}

SessionService::~SessionService() = default;

void SessionService::load() {
  if (!config_.data_dir) return;
  const auto sessions_dir = *config_.data_dir / "sessions";
  const auto experiments_dir = *config_.data_dir / "experiments";
  std::filesystem::create_directories(sessions_dir);
  std::filesystem::create_directories(experiments_dir);

  auto files = [](const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() == ".jsonl") out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  auto bump = [this](const std::string& id) {
    counter_ = std::max<std::uint64_t>(counter_, std::stoull(id.substr(1)));
  };

  for (const auto& path : files(sessions_dir)) {
    auto s = std::make_shared<Session>();
    s->id = path.stem().string();
    for (const auto& e : read_log(path)) s->apply(e, config_.frame_interval);
    s->log = LogFile(path);
    bump(s->id);
    sessions_[s->id] = s;
    if (!s->events.empty()) {
      if (auto token = token_of(s->events.front().payload)) create_tokens_[*token] = s->handle();
    }
  }
  for (const auto& path : files(experiments_dir)) {
    auto x = std::make_shared<Experiment>();
    x->id = path.stem().string();
    for (const auto& e : read_log(path)) x->apply(e);
    x->log = LogFile(path);
    bump(x->id);
    experiments_[x->id] = x;
    if (!x->events.empty()) {
      if (auto token = token_of(x->events.front().payload)) create_tokens_[*token] = x->summary();
    }
  }
}

std::string SessionService::next_id(char prefix) {
  std::ostringstream id;
  id << prefix;
  id.width(6);
  id.fill('0');
  id << ++counter_;
  return id.str();
}

std::shared_ptr<SessionService::Session> SessionService::find_session(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("no session '" + id + "'");
  return it->second;
}

std::shared_ptr<SessionService::Experiment> SessionService::find_experiment(
    const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = experiments_.find(id);
  if (it == experiments_.end()) throw NotFound("no experiment '" + id + "'");
  return it->second;
}

std::shared_ptr<const learner::EnsembleModel> SessionService::model_for(const std::string& task,
                                                                        std::uint64_t seed) {
  using ModelPtr = std::shared_ptr<const learner::EnsembleModel>;
  std::promise<ModelPtr> promise;
  std::shared_future<ModelPtr> future;
  bool owner = false;
  {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(task, seed);
    const auto it = models_.find(key);
    if (it == models_.end()) {
      future = promise.get_future().share();
      models_[key] = future;
      owner = true;
    } else {
      future = it->second;
    }
  }
  if (owner) {
    try {
      promise.set_value(std::make_shared<const learner::EnsembleModel>(
          teaching::initial_model(teaching::make_task(task), seed, config_.train)));
    } catch (...) {
      promise.set_exception(std::current_exception());
      std::lock_guard lock(mutex_);
      models_.erase(std::make_pair(task, seed));
    }
  }
  return future.get();
}

json SessionService::create_session(const json& request) {
  const auto token = token_of(request);
  std::unique_lock lock(mutex_);
  if (token) {
    if (const auto it = create_tokens_.find(*token); it != create_tokens_.end()) return it->second;
  }
  const auto task = teaching::make_task(request.at("task").get<std::string>());
  const auto feedback =
      teaching::feedback_mode_from_string(request.value("feedback", std::string("global")));
  if (!request.contains("seed")) throw InvalidInput("a seed is required");
  const auto seed = request.at("seed").get<std::uint64_t>();

  auto s = std::make_shared<Session>();
  s->id = next_id('s');
  if (config_.data_dir) s->log = LogFile(*config_.data_dir / "sessions" / (s->id + ".jsonl"));
  json payload = {{"task", task.name},
                  {"feedback", teaching::to_string(feedback)},
                  {"teacher", "ui"},
                  {"seed", seed},
                  {"created_at", clock_()}};
  if (task.is_welding()) payload["schedule"] = teaching::uncertainty_schedule(task, seed);
  attach_token(payload, token);
  s->append("session_created", 0.0, payload, config_.frame_interval);
  sessions_[s->id] = s;
  const json handle = s->handle();
  if (token) create_tokens_[*token] = handle;
  return handle;
}

json SessionService::session(const std::string& id) const {
  auto s = find_session(id);
  std::lock_guard lock(s->mutex);
  return s->handle();
}

json SessionService::set_phase(const std::string& id, const json& request) {
  auto s = find_session(id);
  const auto token = token_of(request);
  std::unique_lock lock(s->mutex);
  if (token) {
    if (const auto it = s->tokens.find(*token); it != s->tokens.end()) return it->second;
  }
  const auto phase = teaching::session_phase_from_string(request.at("phase").get<std::string>());
  if (phase <= s->phase) {
    throw StateError("session " + id + " is in phase " + std::string(teaching::to_string(s->phase)) +
                     "; phases only move forward");
  }
  const double t = clock_() - s->created_at;
  json payload = {{"phase", teaching::to_string(phase)}};
  if (phase == SessionPhase::Complete) {
    const auto record = teaching::SessionRecord::from_events(s->events);
    bool truncated = false;
    if (!s->task.is_welding()) {
      const auto first = record.demos_labelled(learner::DemoLabel::UserFirst);
      truncated = first.empty() || first.front().empty() ||
                  s->task.path().project(first.front().samples.back().state) < 0.95;
    }
    payload["truncated"] = truncated;
  }
  attach_token(payload, token);
  s->append("phase_change", t, payload, config_.frame_interval);

  if (phase == SessionPhase::Complete) {
    // Metrics are logged with the session so that a replay does not retrain.
    auto record = teaching::SessionRecord::from_events(s->events);
    try {
      std::shared_ptr<const learner::EnsembleModel> model;
      if (!s->task.is_welding()) model = model_for(s->task.name, s->seed);
      const auto m = teaching::compute_metrics(s->task, record, config_.train, model.get());
      s->append("metric", t, {{"metrics", m}}, config_.frame_interval);
    } catch (const Error&) {
      // Not enough data for metrics; GET /metrics reports why.
    }
  }
  return s->handle();
}

json SessionService::add_samples(const std::string& id, const json& request) {
  auto s = find_session(id);
  const auto token = token_of(request);
  std::vector<std::string> broadcast;
  std::vector<FrameListener> listeners;
  json reply;
  {
    std::unique_lock lock(s->mutex);
    if (token) {
      if (const auto it = s->tokens.find(*token); it != s->tokens.end()) return it->second;
    }
    if (s->phase != SessionPhase::Demo1 && s->phase != SessionPhase::Demo2) {
      throw StateError("session " + id + " is not in a demonstration phase");
    }
    // Validate the whole batch before logging any of it.
    std::vector<learner::DemoSample> batch;
    std::optional<double> last = s->last_t;
    for (const auto& js : request.at("samples")) {
      learner::DemoSample sample;
      sample.t = require_finite(js, "t");
      sample.state.x = require_finite(js, "x");
      sample.state.y = require_finite(js, "y");
      sample.state.theta = learner::wrap_angle(require_finite(js, "theta"));
      sample.state.z = js.contains("z") ? require_finite(js, "z") : 0.0;
      if (last && !(sample.t > *last)) {
        throw InvalidInput("sample times must strictly increase (t = " + std::to_string(sample.t) +
                           ")");
      }
      last = sample.t;
      batch.push_back(sample);
    }

    const bool demo2 = s->phase == SessionPhase::Demo2;
    const auto label = demo2 ? learner::DemoLabel::UserSecond : learner::DemoLabel::UserFirst;
    // The welding baseline is demonstrated without feedback.
    const bool render = s->feedback != teaching::FeedbackMode::None &&
                        (!s->task.is_welding() || demo2);
    std::shared_ptr<const learner::EnsembleModel> model;
    if (render && !s->task.is_welding()) model = model_for(s->task.name, s->seed);
    const learner::FeatureSource source{
        nullptr, s->schedule ? &*s->schedule : nullptr,
        {s->task.nominal_path.front().x, s->task.nominal_path.back().x}};

    // Samples first, so one request's acks carry contiguous seqs; frames follow.
    reply["acks"] = json::array();
    for (const auto& sample : batch) {
      json payload = {{"demo", demo2 ? 1 : 0},
                      {"label", learner::to_string(label)},
                      {"sample", sample}};
      attach_token(payload, token);
      const auto& e = s->append("demo_sample", sample.t, payload, config_.frame_interval);
      reply["acks"].push_back({{"seq", e.seq}, {"t", e.t}});
    }
    std::size_t frames = 0;
    for (const auto& sample : batch) {
      if (!render || sample.t + 1e-9 < s->next_frame) continue;
      std::vector<double> u;
      if (s->task.is_welding()) {
        const auto f = learner::feature_uncertainty(source, sample.state);
        u.assign(f.begin(), f.end());
      } else {
        u.push_back(learner::uncertainty(*model, sample.state));
      }
      const auto frame = s->layout ? display::render(*s->layout, u, sample.t)
                                   : display::render_percent(u, sample.t);
      json frame_payload = frame;
      attach_token(frame_payload, token);
      s->append("frame", sample.t, frame_payload, config_.frame_interval);
      broadcast.push_back(json(frame).dump());
      ++frames;
    }
    reply["frames"] = frames;
    if (token) s->tokens[*token] = reply;
    for (const auto& [handle, listener] : s->listeners) listeners.push_back(listener);
  }
  for (const auto& frame : broadcast) {
    for (const auto& listener : listeners) listener(frame);
  }
  return reply;
}

json SessionService::metrics(const std::string& id) {
  auto s = find_session(id);
  std::unique_lock lock(s->mutex);
  json reply = {{"session_id", id}, {"complete", s->phase == SessionPhase::Complete}};
  if (s->metrics) {
    reply["metrics"] = *s->metrics;
    return reply;
  }
  const auto record = teaching::SessionRecord::from_events(s->events);
  std::shared_ptr<const learner::EnsembleModel> model;
  if (!s->task.is_welding()) model = model_for(s->task.name, s->seed);
  reply["metrics"] = teaching::compute_metrics(s->task, record, config_.train, model.get());
  return reply;
}

json SessionService::create_experiment(const json& request) {
  const auto token = token_of(request);
  std::unique_lock lock(mutex_);
  if (token) {
    if (const auto it = create_tokens_.find(*token); it != create_tokens_.end()) return it->second;
  }
  if (!request.contains("seed")) throw InvalidInput("a seed is required");
  json payload = {{"kind", request.value("kind", std::string("triplet"))},
                  {"seed", request.at("seed").get<std::uint64_t>()},
                  {"created_at", clock_()}};
  if (request.contains("order")) payload["order"] = request["order"];
  attach_token(payload, token);

  auto x = std::make_shared<Experiment>();
  x->apply(Event{0, 0.0, "experiment_created", payload});  // validates before an id is spent
  x = std::make_shared<Experiment>();
  x->id = next_id('e');
  if (config_.data_dir) x->log = LogFile(*config_.data_dir / "experiments" / (x->id + ".jsonl"));
  x->append("experiment_created", clock_(), payload);
  experiments_[x->id] = x;
  const json summary = x->summary();
  if (token) create_tokens_[*token] = summary;
  return summary;
}

json SessionService::next_trial(const std::string& id) {
  auto x = find_experiment(id);
  std::lock_guard lock(x->mutex);
  const std::size_t pending = x->answered();
  if (pending == x->total()) return {{"experiment_id", id}, {"done", true}};
  // (Re)presenting restarts the trial's timer, so a dropped client resumes here.
  const double now = clock_();
  const double settle = x->settle(pending);
  x->append("trial", now, {{"trial_id", pending}, {"presented_at", now}, {"green_at", now + settle}});
  return {{"experiment_id", id},
          {"done", false},
          {"kind", x->kind},
          {"trial_id", pending},
          {"index", pending},
          {"total", x->total()},
          {"stimulus", x->stimulus(pending)},
          {"settle_seconds", settle}};
}

json SessionService::submit_response(const std::string& id, const json& request) {
  auto x = find_experiment(id);
  const auto token = token_of(request);
  std::lock_guard lock(x->mutex);
  if (token) {
    if (const auto it = x->tokens.find(*token); it != x->tokens.end()) return it->second;
  }
  const auto trial_id = request.at("trial_id").get<std::size_t>();
  const std::size_t pending = x->answered();
  if (pending == x->total()) throw StateError("experiment " + id + " is finished");
  if (trial_id != pending) {
    throw StateError("trial " + std::to_string(trial_id) + " is not pending (pending: " +
                     std::to_string(pending) + ")");
  }
  const double rt = require_finite(request, "rt");
  json answer = request.at("answer");
  json correct;
  if (x->pair) {
    const int slot = answer.is_string() ? std::stoi(answer.get<std::string>()) : answer.get<int>();
    answer = slot;
    const auto scored = psychophysics::score(x->pair->trial(trial_id), slot, rt);
    correct = scored.correct ? json(*scored.correct) : json(nullptr);
  } else {
    const auto channel = psychophysics::channel_from_string(answer.get<std::string>());
    correct = psychophysics::score(x->triplet->trial(trial_id), channel, rt).correct;
  }

  const double now = clock_();
  json server_rt = nullptr;
  bool flagged = false;
  if (const auto it = x->green.find(trial_id); it != x->green.end()) {
    server_rt = now - it->second;
    flagged = std::abs(server_rt.get<double>() - rt) > config_.rt_tolerance;
  }
  json payload = {{"trial_id", trial_id}, {"answer", answer},   {"rt", rt},
                  {"server_rt", server_rt}, {"flagged", flagged}, {"correct", correct}};
  attach_token(payload, token);
  const auto& e = x->append("response", now, payload);
  return x->response_reply(e);
}

std::string SessionService::export_log(const std::string& id, const std::string& format) const {
  if (format != "csv" && format != "jsonl") {
    throw InvalidInput("export format must be csv or jsonl");
  }
  auto dump_events = [](const std::vector<Event>& events) {
    std::string out;
    for (const auto& e : events) out += json(e).dump() + "\n";
    return out;
  };
  std::shared_ptr<Session> s;
  std::shared_ptr<Experiment> x;
  {
    std::lock_guard lock(mutex_);
    if (auto it = sessions_.find(id); it != sessions_.end()) s = it->second;
    if (auto it = experiments_.find(id); it != experiments_.end()) x = it->second;
  }
  if (s) {
    std::lock_guard lock(s->mutex);
    if (format == "jsonl") return dump_events(s->events);
    std::string out = teaching::metrics_csv_header() + "\n";
    if (s->metrics) {
      const auto record = teaching::SessionRecord::from_events(s->events);
      out += teaching::metrics_csv_row(id, record, *s->metrics) + "\n";
    }
    return out;
  }
  if (x) {
    std::lock_guard lock(x->mutex);
    if (format == "jsonl") return dump_events(x->events);
    std::ostringstream out;
    if (x->pair) {
      psychophysics::write_csv(out, x->pair_responses);
    } else {
      psychophysics::write_csv(out, x->triplet_responses);
    }
    return out.str();
  }
  throw NotFound("nothing to export under '" + id + "'");
}

std::vector<Event> SessionService::events(const std::string& id) const {
  {
    std::unique_lock lock(mutex_);
    if (auto it = experiments_.find(id); it != experiments_.end()) {
      auto x = it->second;
      lock.unlock();
      std::lock_guard xl(x->mutex);
      return x->events;
    }
  }
  auto s = find_session(id);
  std::lock_guard lock(s->mutex);
  return s->events;
}

std::uint64_t SessionService::subscribe(const std::string& id, FrameListener listener) {
  auto s = find_session(id);
  std::uint64_t handle;
  {
    std::lock_guard lock(mutex_);
    handle = ++listener_counter_;
  }
  std::lock_guard lock(s->mutex);
  s->listeners[handle] = std::move(listener);
  return handle;
}

void SessionService::unsubscribe(const std::string& id, std::uint64_t handle) {
  auto s = find_session(id);
  std::lock_guard lock(s->mutex);
  s->listeners.erase(handle);
}

std::vector<std::string> SessionService::session_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

std::vector<std::string> SessionService::experiment_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, x] : experiments_) out.push_back(id);
  return out;
}

}  // namespace wrapsim::service
