// wrapsim: command-line front end for the simulator and its service.

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "wrapsim/error.hpp"
#include "wrapsim/psychophysics/analysis.hpp"
#include "wrapsim/psychophysics/io.hpp"
#include "wrapsim/psychophysics/protocol.hpp"
#include "wrapsim/service/server.hpp"
#include "wrapsim/service/session_service.hpp"
#include "wrapsim/teaching/metrics.hpp"
#include "wrapsim/teaching/session.hpp"
#include "wrapsim/teaching/task.hpp"
#include "wrapsim/teaching/teacher.hpp"

namespace ws = wrapsim;
using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ws::ConfigurationError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ws::NotFound("cannot read " + path);
  return in;
}

/// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    open_out(path) << text;
  }
}

std::vector<ws::teaching::Event> read_events(std::istream& in) {
  std::vector<ws::teaching::Event> events;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) events.push_back(json::parse(line).get<ws::teaching::Event>());
  }
  return events;
}

int serve(const std::string& address, unsigned short port, const std::string& data_dir,
          std::size_t threads) {
  ws::service::ServiceConfig config;
  if (!data_dir.empty()) {
    config.data_dir = data_dir;
  } else {
    config.data_dir = ws::service::data_dir_from_env();
  }
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);  // inherited by the server threads

  ws::service::SessionService service(config);
  ws::service::HttpServer server(service, address, port);
  server.start(threads);
  std::cerr << "wrapsim listening on " << address << ":" << server.port();
  if (config.data_dir) std::cerr << " (data in " << config.data_dir->string() << ")";
  std::cerr << std::endl;
  int received = 0;
  sigwait(&signals, &received);
  server.stop();
  return 0;
}

int simulate(const std::string& task_name, const std::string& teacher_name,
             const std::string& feedback_name, std::uint64_t seed, double budget,
             const std::string& events_path, const std::string& metrics_path) {
  const auto task = ws::teaching::make_task(task_name);
  const auto feedback = ws::teaching::feedback_mode_from_string(feedback_name);
  ws::teaching::SessionOptions options;
  options.budget = budget;
  ws::teaching::SessionRecord record;
  if (task.is_welding()) {
    record = ws::teaching::run_welding_session(task, ws::teaching::WeldTeacher{}, feedback, seed,
                                               options);
  } else {
    auto teacher = ws::teaching::make_segment_teacher(teacher_name);
    record = ws::teaching::run_session(task, *teacher, feedback, seed, options);
  }
  const auto metrics = ws::teaching::compute_metrics(task, record, options.train);
  if (!events_path.empty()) {
    std::string text;
    for (const auto& e : record.to_events()) text += json(e).dump() + "\n";
    emit(events_path, text);
  }
  if (!metrics_path.empty()) {
    emit(metrics_path, ws::teaching::metrics_csv_header() + "\n" +
                           ws::teaching::metrics_csv_row(task.name, record, metrics) + "\n");
  }
  if (events_path != "-" && metrics_path != "-") std::cout << json(metrics).dump(2) << "\n";
  return 0;
}

int protocol(const std::string& kind, std::uint64_t seed, const std::string& order,
             const std::string& out) {
  namespace pp = ws::psychophysics;
  if (kind == "pair") {
    emit(out, pp::serialize(pp::generate_pair_protocol(seed)));
  } else if (kind == "triplet") {
    emit(out, pp::serialize(pp::generate_triplet_protocol(seed, pp::method_order_from_string(order))));
  } else {
    throw ws::InvalidInput("protocol kind must be pair or triplet");
  }
  return 0;
}

int fit(const std::string& csv_path, const std::string& protocol_path, double reference) {
  namespace pp = ws::psychophysics;
  std::optional<pp::PairProtocol> protocol;
  if (!protocol_path.empty()) {
    auto in = open_in(protocol_path);
    protocol = json::parse(in).get<pp::PairProtocol>();
  }
  auto in = open_in(csv_path);
  const auto log = pp::read_csv(in, reference, protocol ? &*protocol : nullptr);
  json out = json::object();
  if (!log.pairs.empty()) {
    const auto f = pp::fit_sigmoid(log.pairs, reference);
    json props = json::array();
    for (const auto& p : f.proportions) {
      props.push_back({{"pressure", p.pressure}, {"percent", p.percent}, {"count", p.count}});
    }
    out["pairs"] = {{"count", log.pairs.size()}, {"k", f.k},     {"jnd", f.jnd},
                    {"weber", f.weber},          {"sse", f.sse}, {"proportions", props}};
    try {
      const auto b = pp::bias(log.pairs);
      out["pairs"]["bias"] = {{"first_pct", b.first_pct}, {"second_pct", b.second_pct},
                              {"count", b.count}};
    } catch (const ws::InvalidInput&) {
    }
    const auto times = pp::time_summary(log.pairs);
    out["pairs"]["rt"] = {{"mean", times.overall.mean}, {"sd", times.overall.sd}};
  }
  if (!log.triplets.empty()) {
    const auto m = pp::confusion_matrix(log.triplets);
    json accuracy = json::object();
    for (std::size_t c = 0; c < 3; ++c) {
      const auto name = std::string(pp::to_string(pp::kChannels[c]));
      accuracy[name] = m.accuracy[c] ? json(*m.accuracy[c]) : json(nullptr);
    }
    const auto times = pp::time_summary(log.triplets);
    out["triplets"] = {{"count", m.total},
                       {"counts", m.counts},
                       {"accuracy", accuracy},
                       {"overall", m.overall},
                       {"rt", {{"mean", times.overall.mean}, {"sd", times.overall.sd}}}};
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int export_metrics(const std::string& events_path, const std::string& out,
                   const std::string& session_id) {
  auto in = open_in(events_path);
  const auto events = read_events(in);
  const auto record = ws::teaching::SessionRecord::from_events(events);
  const auto task = ws::teaching::make_task(record.task);
  const auto metrics = ws::teaching::compute_metrics(task, record);
  const auto id = session_id.empty() ? std::filesystem::path(events_path).stem().string()
                                     : session_id;
  emit(out, ws::teaching::metrics_csv_header() + "\n" +
                ws::teaching::metrics_csv_row(id, record, metrics) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for wrapped pneumatic uncertainty displays"};
  app.require_subcommand(1);

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP/WebSocket service");
  std::string address = "127.0.0.1";
  unsigned short port = 8080;
  std::string data_dir;
  std::size_t threads = 4;
  serve_cmd->add_option("--address", address, "Listen address")->capture_default_str();
  serve_cmd->add_option("--port", port, "Listen port (0 picks one)")->capture_default_str();
  serve_cmd->add_option("--data-dir", data_dir,
                        "Directory for session logs (default: $WRAPSIM_DATA_DIR; none keeps "
                        "everything in memory)");
  serve_cmd->add_option("--threads", threads, "Worker threads")->capture_default_str();

  auto* sim_cmd = app.add_subcommand("simulate", "Run one scripted closed-loop session");
  std::string task = "reach_start";
  std::string teacher = "threshold";
  std::string feedback = "global";
  std::uint64_t seed = 0;
  double budget = 1.0 / 3.0;
  std::string events_out;
  std::string metrics_out;
  sim_cmd->add_option("--task", task, "reach_start, reach_middle, reach_end or welding")
      ->capture_default_str();
  sim_cmd->add_option("--teacher", teacher, "threshold or fixed (segment tasks)")
      ->capture_default_str();
  sim_cmd->add_option("--feedback", feedback, "none, gui, local or global")->capture_default_str();
  sim_cmd->add_option("--seed", seed, "Session seed")->required();
  sim_cmd->add_option("--budget", budget, "Path fraction re-taught in demo 2")
      ->capture_default_str();
  sim_cmd->add_option("--events", events_out, "Write the event log (JSONL; - for stdout)");
  sim_cmd->add_option("--metrics", metrics_out, "Write the metrics row (CSV; - for stdout)");

  auto* proto_cmd = app.add_subcommand("protocol", "Generate a psychophysics protocol");
  std::string kind;
  std::string order = "local_first";
  std::string proto_out;
  proto_cmd->add_option("kind", kind, "pair or triplet")->required();
  proto_cmd->add_option("--seed", seed, "Protocol seed")->required();
  proto_cmd->add_option("--order", order, "local_first or global_first (triplet)")
      ->capture_default_str();
  proto_cmd->add_option("--out", proto_out, "Output file (default stdout)");

  auto* fit_cmd = app.add_subcommand("fit", "Analyze a response CSV");
  std::string csv_path;
  std::string protocol_path;
  double reference = ws::psychophysics::kReferencePressure;
  fit_cmd->add_option("csv", csv_path, "Response CSV")->required();
  fit_cmd->add_option("--protocol", protocol_path,
                      "Pair protocol JSON (gives the test slot of identical pairs)");
  fit_cmd->add_option("--reference", reference, "Reference pressure, psi")->capture_default_str();

  auto* export_cmd = app.add_subcommand("export", "Recompute metrics from a session log");
  std::string events_in;
  std::string export_out;
  std::string session_id;
  export_cmd->add_option("events", events_in, "Session event log (JSONL)")->required();
  export_cmd->add_option("--out", export_out, "Metrics CSV (default stdout)");
  export_cmd->add_option("--id", session_id, "Session id column (default: file stem)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(address, port, data_dir, threads);
    if (*sim_cmd) {
      return simulate(task, teacher, feedback, seed, budget, events_out, metrics_out);
    }
    if (*proto_cmd) return protocol(kind, seed, order, proto_out);
    if (*fit_cmd) return fit(csv_path, protocol_path, reference);
    if (*export_cmd) return export_metrics(events_in, export_out, session_id);
  } catch (const std::exception& e) {
    std::cerr << "wrapsim: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
