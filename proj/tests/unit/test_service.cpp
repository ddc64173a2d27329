#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <memory>
#include <sstream>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "wrapsim/error.hpp"
#include "wrapsim/psychophysics/io.hpp"
#include "wrapsim/service/server.hpp"
#include "wrapsim/service/session_service.hpp"
#include "wrapsim/teaching/metrics.hpp"
#include "wrapsim/teaching/task.hpp"
#include "wrapsim/teaching/teacher.hpp"

// After the Eigen users: httplib pulls in <resolv.h>, whose _res macro breaks Eigen.
#include <httplib.h>

using namespace wrapsim::service;
using nlohmann::json;
namespace teaching = wrapsim::teaching;

namespace {

ServiceConfig quick_config(std::optional<std::filesystem::path> dir = std::nullopt) {
  ServiceConfig c;
  c.data_dir = std::move(dir);
  c.train.members = 3;
  c.train.epochs = 40;
  c.train.hidden = 16;
  return c;
}

/// Manually advanced clock.
struct FakeClock {
  std::shared_ptr<double> now = std::make_shared<double>(100.0);
  Clock clock() const {
    return [now = now] { return *now; };
  }
  void advance(double s) const { *now += s; }
};

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("wrapsim-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

json samples_of(const wrapsim::learner::Demonstration& demo, std::size_t from = 0,
                std::size_t count = SIZE_MAX) {
  json samples = json::array();
  for (std::size_t i = from; i < demo.samples.size() && i - from < count; ++i) {
    const auto& s = demo.samples[i];
    samples.push_back(
        {{"t", s.t}, {"x", s.state.x}, {"y", s.state.y}, {"theta", s.state.theta}, {"z", s.state.z}});
  }
  return {{"samples", samples}};
}

wrapsim::learner::Demonstration walk(const std::string& task, teaching::PathRange range, double t0,
                                     std::uint64_t seed) {
  return teaching::traverse(teaching::make_task(task).path(), range,
                            wrapsim::learner::DemoLabel::UserFirst, t0, {}, seed);
}

/// Runs demo 1 over the whole path and demo 2 over `second`, then completes.
std::string scripted_session(SessionService& service, const std::string& task,
                             const std::string& feedback, std::uint64_t seed,
                             teaching::PathRange second) {
  const auto id = service
                      .create_session({{"task", task}, {"feedback", feedback}, {"seed", seed}})
                      .at("id")
                      .get<std::string>();
  service.set_phase(id, {{"phase", "demo1"}});
  const auto d1 = walk(task, {0, 1}, 0.0, seed);
  service.add_samples(id, samples_of(d1));
  service.set_phase(id, {{"phase", "demo2"}});
  const auto d2 = walk(task, second, d1.samples.back().t + 1.0, seed + 1);
  service.add_samples(id, samples_of(d2));
  service.set_phase(id, {{"phase", "complete"}});
  return id;
}

}  // namespace

TEST_CASE("sessions are created with distinct ids") {
  SessionService service(quick_config());
  const auto a = service.create_session({{"task", "reach_start"}, {"feedback", "global"}, {"seed", 1}});
  const auto b = service.create_session({{"task", "reach_start"}, {"feedback", "global"}, {"seed", 1}});
  CHECK(a.at("id") != b.at("id"));
  CHECK(a.at("status") == "idle");
  CHECK(a.at("mode") == "global");
  CHECK(service.session(a.at("id")).at("task") == "reach_start");
  CHECK_THROWS_AS(service.create_session({{"task", "nope"}, {"seed", 1}}), wrapsim::NotFound);
  CHECK_THROWS_AS(service.create_session({{"task", "reach_start"}}), wrapsim::InvalidInput);
  CHECK_THROWS_AS(service.session("s999999"), wrapsim::NotFound);
}

TEST_CASE("create is idempotent on a client token") {
  SessionService service(quick_config());
  const json req = {{"task", "welding"}, {"feedback", "local"}, {"seed", 3}, {"client_token", "abc"}};
  const auto a = service.create_session(req);
  const auto b = service.create_session(req);
  CHECK(a == b);
  CHECK(service.session_ids().size() == 1);
}

TEST_CASE("phases only move forward and gate samples") {
  SessionService service(quick_config());
  const auto id =
      service.create_session({{"task", "welding"}, {"feedback", "none"}, {"seed", 1}}).at("id");
  const json one = {{"samples", json::array({{{"t", 0.0}, {"x", 0.0}, {"y", 0.05}, {"theta", 0.0}}})}};
  CHECK_THROWS_AS(service.add_samples(id, one), wrapsim::StateError);
  service.set_phase(id, {{"phase", "demo1"}});
  CHECK_NOTHROW(service.add_samples(id, one));
  CHECK_THROWS_AS(service.set_phase(id, {{"phase", "idle"}}), wrapsim::StateError);
  CHECK_THROWS_AS(service.set_phase(id, {{"phase", "demo1"}}), wrapsim::StateError);
  service.set_phase(id, {{"phase", "complete"}});
  const json later = {{"samples", json::array({{{"t", 1.0}, {"x", 0.0}, {"y", 0.05}, {"theta", 0.0}}})}};
  CHECK_THROWS_AS(service.add_samples(id, later), wrapsim::StateError);
  CHECK(service.session(id).at("status") == "complete");
}

TEST_CASE("a hundred samples get a hundred contiguous acks") {
  SessionService service(quick_config());
  const auto id =
      service.create_session({{"task", "welding"}, {"feedback", "global"}, {"seed", 1}}).at("id");
  service.set_phase(id, {{"phase", "demo1"}});
  json samples = json::array();
  for (int i = 0; i < 100; ++i) {
    samples.push_back({{"t", i * 0.01}, {"x", -0.3 + i * 0.006}, {"y", 0.05}, {"theta", 0.0}});
  }
  const auto reply = service.add_samples(id, {{"samples", samples}});
  REQUIRE(reply.at("acks").size() == 100);
  for (std::size_t i = 1; i < 100; ++i) {
    CHECK(reply["acks"][i]["seq"].get<std::uint64_t>() ==
          reply["acks"][i - 1]["seq"].get<std::uint64_t>() + 1);
  }
  CHECK(reply.at("frames") == 0);  // the welding baseline has no feedback
}

TEST_CASE("bad sample batches are rejected whole") {
  SessionService service(quick_config());
  const auto id =
      service.create_session({{"task", "reach_end"}, {"feedback", "none"}, {"seed", 1}}).at("id");
  service.set_phase(id, {{"phase", "demo1"}});
  const json backwards = {{"samples", json::array({{{"t", 1.0}, {"x", 0}, {"y", 0}, {"theta", 0}},
                                                   {{"t", 0.5}, {"x", 0}, {"y", 0}, {"theta", 0}}})}};
  CHECK_THROWS_AS(service.add_samples(id, backwards), wrapsim::InvalidInput);
  CHECK(service.events(id).size() == 2);
  const json missing = {{"samples", json::array({{{"t", 1.0}, {"x", 0}}})}};
  CHECK_THROWS(service.add_samples(id, missing));
  CHECK(service.events(id).size() == 2);
}

TEST_CASE("frames are throttled to 20 Hz whatever the sample rate") {
  SessionService service(quick_config());
  const auto id =
      service.create_session({{"task", "reach_start"}, {"feedback", "local"}, {"seed", 2}}).at("id");
  service.set_phase(id, {{"phase", "demo1"}});
  json samples = json::array();
  for (int i = 0; i < 1000; ++i) {
    samples.push_back({{"t", i * 0.001}, {"x", -0.4}, {"y", -0.4 + i * 1e-4}, {"theta", -0.6}});
  }
  const auto reply = service.add_samples(id, {{"samples", samples}});
  CHECK(reply.at("frames").get<int>() <= 21);
  CHECK(reply.at("frames").get<int>() >= 19);
  double last = -1.0;
  for (const auto& e : service.events(id)) {
    if (e.type != "frame") continue;
    CHECK(e.t - last >= 0.05 - 1e-9);
    last = e.t;
  }
}

TEST_CASE("the same stream gives the same frames") {
  SessionService service(quick_config());
  const auto demo = walk("reach_middle", {0, 1}, 0.0, 9);
  std::vector<std::string> logs;
  for (int run = 0; run < 2; ++run) {
    const auto id =
        service.create_session({{"task", "reach_middle"}, {"feedback", "global"}, {"seed", 9}})
            .at("id");
    service.set_phase(id, {{"phase", "demo1"}});
    service.add_samples(id, samples_of(demo, 0, 50));
    service.add_samples(id, samples_of(demo, 50));
    std::string frames;
    for (const auto& e : service.events(id)) {
      if (e.type == "frame") frames += e.payload.dump() + "\n";
    }
    logs.push_back(frames);
  }
  CHECK_FALSE(logs[0].empty());
  CHECK(logs[0] == logs[1]);
}

TEST_CASE("sample retries with a token are not logged twice") {
  SessionService service(quick_config());
  const auto id =
      service.create_session({{"task", "reach_end"}, {"feedback", "gui"}, {"seed", 4}}).at("id");
  service.set_phase(id, {{"phase", "demo1"}});
  auto body = samples_of(walk("reach_end", {0, 1}, 0.0, 4), 0, 30);
  body["client_token"] = "batch-1";
  const auto first = service.add_samples(id, body);
  const auto size = service.events(id).size();
  const auto again = service.add_samples(id, body);
  CHECK(first == again);
  CHECK(service.events(id).size() == size);
  auto phase = json{{"phase", "demo2"}, {"client_token", "p2"}};
  CHECK(service.set_phase(id, phase) == service.set_phase(id, phase));
}

TEST_CASE("completing a session logs its metrics") {
  SessionService service(quick_config());
  const auto id = scripted_session(service, "reach_start", "global", 5, {0.0, 1.0 / 3.0});
  const auto m = service.metrics(id);
  CHECK(m.at("complete") == true);
  const auto metrics = m.at("metrics").get<teaching::Metrics>();
  REQUIRE(metrics.correct_segment.has_value());
  CHECK(*metrics.correct_segment > 90.0);
  CHECK(*metrics.improvement_u > 0.0);
  const auto events = service.events(id);
  CHECK(events.back().type == "metric");
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].seq == i);
}

TEST_CASE("export, import and recompute give identical metrics") {
  SessionService service(quick_config());
  const auto id = scripted_session(service, "reach_middle", "local", 6, {0.3, 0.7});
  const auto jsonl = service.export_log(id, "jsonl");
  std::vector<teaching::Event> events;
  std::istringstream in(jsonl);
  std::string line;
  while (std::getline(in, line)) events.push_back(json::parse(line).get<teaching::Event>());
  CHECK(events.size() == service.events(id).size());
  const auto record = teaching::SessionRecord::from_events(events);
  const auto recomputed =
      teaching::compute_metrics(teaching::make_task(record.task), record, quick_config().train);
  CHECK(recomputed == service.metrics(id).at("metrics").get<teaching::Metrics>());

  const auto csv = service.export_log(id, "csv");
  CHECK(csv == teaching::metrics_csv_header() + "\n" +
                   teaching::metrics_csv_row(id, record, recomputed) + "\n");
  CHECK_THROWS_AS(service.export_log(id, "xml"), wrapsim::InvalidInput);
  CHECK_THROWS_AS(service.export_log("nothing", "csv"), wrapsim::NotFound);
}

TEST_CASE("an empty session exports a header-only CSV") {
  SessionService service(quick_config());
  const auto id =
      service.create_session({{"task", "reach_start"}, {"feedback", "none"}, {"seed", 1}}).at("id");
  CHECK(service.export_log(id, "csv") == teaching::metrics_csv_header() + "\n");
  const auto jsonl = service.export_log(id, "jsonl");
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 1);
}

TEST_CASE("welding sessions render the scripted schedule in demo 2 only") {
  SessionService service(quick_config());
  const auto id = scripted_session(service, "welding", "global", 7, {0, 1});
  bool saw_demo2 = false;
  std::size_t frames = 0;
  for (const auto& e : service.events(id)) {
    if (e.type == "phase_change" && e.payload.at("phase") == "demo2") saw_demo2 = true;
    if (e.type == "frame") {
      CHECK(saw_demo2);
      CHECK(e.payload.at("locations").size() == 3);
      ++frames;
    }
  }
  CHECK(frames > 0);
  const auto m = service.metrics(id).at("metrics");
  CHECK(m.at("improvement_weld").is_number());
  CHECK(m.at("u1").is_null());
}

TEST_CASE("logs persist and replay into an identical service") {
  TempDir dir;
  std::string id;
  std::string exported;
  json metrics;
  {
    SessionService service(quick_config(dir.path));
    id = scripted_session(service, "reach_end", "gui", 8, {2.0 / 3.0, 1.0});
    exported = service.export_log(id, "jsonl");
    metrics = service.metrics(id);
    service.create_experiment({{"kind", "pair"}, {"seed", 2}, {"client_token", "x1"}});
  }
  CHECK(std::filesystem::exists(dir.path / "sessions" / (id + ".jsonl")));
  SessionService reloaded(quick_config(dir.path));
  CHECK(reloaded.export_log(id, "jsonl") == exported);
  CHECK(reloaded.metrics(id) == metrics);
  CHECK(reloaded.session(id).at("status") == "complete");
  CHECK(reloaded.experiment_ids().size() == 1);
  // Tokens survive a restart; fresh ids continue after the loaded ones.
  const auto again = reloaded.create_experiment({{"kind", "pair"}, {"seed", 2}, {"client_token", "x1"}});
  CHECK(again.at("id") == reloaded.experiment_ids().front());
  const auto fresh =
      reloaded.create_session({{"task", "reach_end"}, {"feedback", "gui"}, {"seed", 8}}).at("id");
  CHECK(fresh != id);
  CHECK(fresh.get<std::string>() > again.at("id").get<std::string>());
}

TEST_CASE("triplet experiment: full run, resumable, rt cross-check") {
  FakeClock clock;
  SessionService service(quick_config(), clock.clock());
  const auto exp = service.create_experiment({{"kind", "triplet"}, {"seed", 3}, {"order", "global_first"}});
  const std::string id = exp.at("id");
  CHECK(exp.at("trials") == 96);

  const auto first = service.next_trial(id);
  CHECK(first.at("trial_id") == 0);
  CHECK(first.at("stimulus").at("method") == "global");
  CHECK(first.at("settle_seconds").get<double>() > 0.0);
  // A dropped client asks again and gets the same pending trial.
  CHECK(service.next_trial(id).at("trial_id") == 0);
  CHECK_THROWS_AS(service.submit_response(id, {{"trial_id", 1}, {"answer", "left"}, {"rt", 1.0}}),
                  wrapsim::StateError);

  const auto protocol = wrapsim::psychophysics::generate_triplet_protocol(
      3, wrapsim::psychophysics::MethodOrder::GlobalFirst);
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < 96; ++i) {
    const auto trial = service.next_trial(id);
    REQUIRE(trial.at("trial_id") == i);
    const double settle = trial.at("settle_seconds");
    clock.advance(settle + 2.0);
    // Every tenth client reports an rt that is 7 s off.
    const double rt = i % 10 == 0 ? 9.0 : 2.0;
    const auto target = protocol.trials[i].target;
    const auto reply = service.submit_response(
        id, {{"trial_id", i}, {"answer", wrapsim::psychophysics::to_string(target)}, {"rt", rt}});
    CHECK(reply.at("correct") == true);
    CHECK(reply.at("server_rt").get<double>() == doctest::Approx(2.0));
    if (reply.at("flagged").get<bool>()) ++flagged;
    CHECK(reply.at("done") == (i == 95));
  }
  CHECK(flagged == 10);
  CHECK(service.next_trial(id).at("done") == true);
  CHECK_THROWS_AS(service.submit_response(id, {{"trial_id", 96}, {"answer", "left"}, {"rt", 1.0}}),
                  wrapsim::StateError);

  std::istringstream csv(service.export_log(id, "csv"));
  const auto log = wrapsim::psychophysics::read_csv(csv);
  CHECK(log.triplets.size() == 96);
}

TEST_CASE("pair experiment answers by slot") {
  FakeClock clock;
  SessionService service(quick_config(), clock.clock());
  const std::string id = service.create_experiment({{"kind", "pair"}, {"seed", 1}}).at("id");
  const auto trial = service.next_trial(id);
  CHECK(trial.at("stimulus").contains("first"));
  clock.advance(3.0);
  const auto reply = service.submit_response(id, {{"trial_id", 0}, {"answer", 2}, {"rt", 1.5}});
  CHECK(reply.at("remaining") == 69);
  CHECK_THROWS_AS(service.create_experiment({{"kind", "quartet"}, {"seed", 1}}), wrapsim::InvalidInput);
  CHECK_THROWS_AS(service.next_trial("e424242"), wrapsim::NotFound);
}

TEST_CASE("HTTP routes and status codes") {
  SessionService service(quick_config());
  HttpServer server(service, "127.0.0.1", 0);
  server.start(2);
  httplib::Client client("127.0.0.1", server.port());

  auto res = client.Get("/health");
  REQUIRE(res);
  CHECK(res->status == 200);

  res = client.Post("/sessions", R"({"task":"reach_start","feedback":"global","seed":1})",
                    "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  const std::string id = json::parse(res->body).at("id");

  res = client.Post("/sessions", R"({"task":"cooking","seed":1})", "application/json");
  CHECK(res->status == 404);
  res = client.Post("/sessions", "{not json", "application/json");
  CHECK(res->status == 400);
  res = client.Post("/sessions/" + id + "/samples", R"({"samples":[]})", "application/json");
  CHECK(res->status == 409);
  res = client.Post("/sessions/" + id + "/phase", R"({"phase":"demo1"})", "application/json");
  CHECK(res->status == 200);
  res = client.Post("/sessions/" + id + "/samples",
                    R"({"samples":[{"t":0,"x":-0.4,"y":-0.4,"theta":-0.6}]})", "application/json");
  CHECK(res->status == 200);
  CHECK(json::parse(res->body).at("frames") == 1);
  res = client.Get("/sessions/" + id + "/metrics");
  CHECK(res->status == 200);
  res = client.Get("/export/" + id + "?format=jsonl");
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "application/x-ndjson");
  res = client.Get("/export/" + id + "?format=csv");
  CHECK(res->get_header_value("Content-Type") == "text/csv");
  res = client.Get("/nowhere");
  CHECK(res->status == 404);

  httplib::Headers key{{"Idempotency-Key", "k-1"}};
  const auto a = client.Post("/experiments", key, R"({"kind":"pair","seed":4})", "application/json");
  const auto b = client.Post("/experiments", key, R"({"kind":"pair","seed":4})", "application/json");
  CHECK(a->body == b->body);
  const std::string eid = json::parse(a->body).at("id");
  res = client.Post("/experiments/" + eid + "/next", "", "application/json");
  CHECK(res->status == 200);
  res = client.Post("/experiments/" + eid + "/responses", R"({"trial_id":3,"answer":1,"rt":1})",
                    "application/json");
  CHECK(res->status == 409);
  res = client.Post("/experiments/" + eid + "/responses", R"({"trial_id":0,"answer":1,"rt":1})",
                    "application/json");
  CHECK(res->status == 200);
  server.stop();
}

TEST_CASE("WebSocket clients receive rendered frames") {
  namespace beast = boost::beast;
  namespace websocket = beast::websocket;
  using tcp = boost::asio::ip::tcp;

  SessionService service(quick_config());
  HttpServer server(service, "127.0.0.1", 0);
  server.start(2);
  const std::string id =
      service.create_session({{"task", "reach_middle"}, {"feedback", "global"}, {"seed", 2}}).at("id");
  service.set_phase(id, {{"phase", "demo1"}});

  boost::asio::io_context io;
  tcp::resolver resolver(io);
  websocket::stream<tcp::socket> ws(io);
  boost::asio::connect(ws.next_layer(),
                       resolver.resolve("127.0.0.1", std::to_string(server.port())));
  ws.handshake("127.0.0.1", "/sessions/" + id + "/frames");

  const auto reply = service.add_samples(id, samples_of(walk("reach_middle", {0, 0.2}, 0.0, 2)));
  const auto expected = reply.at("frames").get<std::size_t>();
  REQUIRE(expected > 2);
  std::vector<json> received;
  for (std::size_t i = 0; i < expected; ++i) {
    beast::flat_buffer buffer;
    ws.read(buffer);
    received.push_back(json::parse(beast::buffers_to_string(buffer.data())));
  }
  std::vector<json> logged;
  for (const auto& e : service.events(id)) {
    if (e.type == "frame") logged.push_back(e.payload);
  }
  CHECK(received == logged);
  for (const auto& f : received) {
    CHECK(f.contains("t"));
    CHECK(f.at("locations").size() == 3);
  }
  ws.close(websocket::close_code::normal);

  websocket::stream<tcp::socket> bad(io);
  boost::asio::connect(bad.next_layer(),
                       resolver.resolve("127.0.0.1", std::to_string(server.port())));
  CHECK_THROWS(bad.handshake("127.0.0.1", "/sessions/s999999/frames"));
  server.stop();
}
