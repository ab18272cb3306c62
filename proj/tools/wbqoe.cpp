// wbqoe: relay service, schedule/export/analysis utilities and bot runner.

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI/CLI11.hpp>
#include <boost/asio/signal_set.hpp>

#include "wbqoe/analysis.hpp"
#include "wbqoe/latency_injector.hpp"
#include "wbqoe/net/asio_scheduler.hpp"
#include "wbqoe/net/ws_client.hpp"
#include "wbqoe/net/ws_server.hpp"
#include "wbqoe/orchestrator.hpp"
#include "wbqoe/ratings.hpp"
#include "wbqoe/schedule.hpp"
#include "wbqoe/simharness.hpp"

namespace fs = std::filesystem;
using namespace wbqoe;

namespace {

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::StorageFailure, "cannot write " + path);
  out << content;
}

ExperimentConfig load_config_or_default(const std::string& path) {
  auto c = path.empty() ? ExperimentConfig{} : load_config(path);
  c.validate();
  return c;
}

// --- serve

struct ServeArgs {
  std::string host = "0.0.0.0";
  unsigned short port = 8080;
  std::string config;
  std::string templates;
  std::uint64_t seed = 0;
  std::string log_dir;
  bool virtual_clock = false;
  std::optional<std::int64_t> target_latency_ms;
  std::optional<double> inherent_latency_ms;
  std::optional<double> tick_rate;
  std::optional<std::size_t> task_slots;
  std::optional<std::int64_t> rating_timeout_ms;
  std::optional<std::int64_t> deadlock_ms;
  std::optional<std::size_t> exit_after_pairs;
};

int serve(const ServeArgs& a) {
  net::ServerOptions o;
  o.config = load_config_or_default(a.config);
  if (a.inherent_latency_ms)
    for (auto p : o.config.platforms) o.config.inherent_latency_ms[p] = *a.inherent_latency_ms;
  if (a.target_latency_ms) o.config.latency_levels = {*a.target_latency_ms};
  if (a.tick_rate) o.config.tick_rate = *a.tick_rate;
  if (a.rating_timeout_ms) o.config.rating_timeout_ms = *a.rating_timeout_ms;
  o.config.validate();
  if (!a.templates.empty()) o.templates = load_templates(a.templates);
  o.session.task_slots = a.task_slots;
  o.seed = a.seed;
  if (!a.log_dir.empty()) o.log_dir = fs::path(a.log_dir);
  if (a.deadlock_ms) o.deadlock_after = from_ms(*a.deadlock_ms);

  net::asio::io_context io;
  VirtualScheduler vsched;
  net::AsioScheduler rsched(io);
  Scheduler& sched = a.virtual_clock ? static_cast<Scheduler&>(vsched) : static_cast<Scheduler&>(rsched);
  const net::tcp::endpoint ep(net::asio::ip::make_address(a.host), a.port);
  net::RelayServer server(io, sched, o, ep);
  server.start();
  std::cout << "listening on " << a.host << ":" << server.port() << (a.virtual_clock ? " (virtual clock)" : "")
            << std::endl;

  bool stop = false;
  net::asio::signal_set signals(io, SIGINT, SIGTERM);
  signals.async_wait([&](const boost::system::error_code& ec, int) {
    if (!ec) stop = true;
  });
  server.on_pair_finished = [&](const std::string& code) {
    std::cout << "pair " << code << " finished" << std::endl;
    if (a.exit_after_pairs && server.finished_pairs() >= *a.exit_after_pairs) stop = true;
  };
  auto done = [&] { return stop; };
  if (a.virtual_clock) {
    net::run_hybrid(io, vsched, done);
  } else {
    while (!stop && !io.stopped()) io.run_one_for(std::chrono::milliseconds(100));
  }
  server.stop();
  signals.cancel();
  io.run_for(std::chrono::milliseconds(200));
  return 0;
}

// --- bot

struct BotArgs {
  std::string host = "127.0.0.1";
  std::string port = "8080";
  std::string pair;
  std::string id;
  std::int64_t stroke_ms = 500;
  std::string fc_policy = "in_order";
  std::optional<int> score;
  std::int64_t rating_delay_ms = 1000;
  std::uint64_t seed = 1;
  bool presence = false;
};

int bot(const BotArgs& a) {
  sim::BotScript s;
  s.id = a.id;
  s.stroke_duration = from_ms(a.stroke_ms);
  auto policy = sim::parse_fc_policy(a.fc_policy);
  if (!policy) throw Error(Errc::InvalidConfig, "unknown fc policy '" + a.fc_policy + "'");
  s.fc_policy = *policy;
  s.fixed_score = a.score;
  s.rating_delay = from_ms(a.rating_delay_ms);
  s.seed = a.seed;
  s.presence = a.presence;
  net::asio::io_context io;
  net::AsioScheduler sched(io);
  auto client = std::make_shared<net::WsBotClient>(io, sched, a.host, a.port, s, a.pair);
  client->on_done = [&io] { io.stop(); };
  client->start();
  io.run();
  if (client->error()) {
    std::cerr << "bot " << a.id << ": " << *client->error() << '\n';
    return 1;
  }
  std::cout << "bot " << a.id << ": " << client->bot().strokes_completed() << " strokes, session "
            << (client->done() ? "complete" : "incomplete") << '\n';
  return client->done() ? 0 : 1;
}

// --- calibrate

int calibrate(const std::string& host, const std::string& port, int probes, double processing_ms) {
  namespace websocket = net::websocket;
  net::asio::io_context io;
  net::tcp::resolver resolver(io);
  websocket::stream<net::tcp::socket> ws(io);
  net::asio::connect(ws.next_layer(), resolver.resolve(host, port));
  ws.handshake(host, "/");
  ws.binary(true);
  SteadyClock clock;
  std::vector<double> rtts;
  FrameReader reader;
  for (int i = 0; i < probes; ++i) {
    ControlPayload c;
    c.kind = ControlKind::ClockProbe;
    c.probe_id = i;
    c.t_probe = clock.now();
    const auto frame = encode({kProtocolVersion, i + 1, "calibrate", "calibrate", clock.now(), c});
    ws.write(net::asio::buffer(frame));
    std::optional<Envelope> echo;
    while (!echo) {
      net::beast::flat_buffer buf;
      ws.read(buf);
      const auto d = buf.cdata();
      reader.feed({static_cast<const std::uint8_t*>(d.data()), d.size()});
      echo = reader.next();
    }
    rtts.push_back(to_ms(clock.now() - *c.t_probe));
  }
  ws.close(websocket::close_code::normal);
  const double di = calibrate_inherent(rtts, processing_ms);
  std::cout << nlohmann::json{{"probes", probes}, {"inherent_latency_ms", di}, {"rtts_ms", rtts}}.dump(2) << '\n';
  return 0;
}

// --- simulate

struct SimulateArgs {
  std::string mode = "sc";
  std::string platform = "pc";
  std::int64_t latency_ms = 100;
  std::optional<double> inherent_ms;
  std::size_t slots = 24;
  std::int64_t stroke_ms = 500;
  std::uint64_t seed = 1;
  bool virtual_clock = false;
  std::string fc_policy = "in_order";
  std::string report;
  std::string log_dir;
  std::optional<std::size_t> messages;
  bool experiment = false;
  std::string config;
};

int simulate(const SimulateArgs& a) {
  nlohmann::json report;
  const auto clock = a.virtual_clock ? sim::ClockKind::Virtual : sim::ClockKind::Real;
  auto platform = parse_Platform(a.platform);
  auto mode = parse_Mode(a.mode);
  auto policy = sim::parse_fc_policy(a.fc_policy);
  if (!platform || !mode || !policy) throw Error(Errc::InvalidConfig, "unknown platform, mode or fc policy");
  const ExperimentConfig defaults;
  const double di = a.inherent_ms.value_or(defaults.inherent_for(*platform));

  if (a.messages) {
    auto r = sim::measure_latency(a.latency_ms, di, *a.messages, a.seed, defaults.tick_rate, clock);
    report = {{"target_latency_ms", a.latency_ms}, {"inherent_latency_ms", di}, {"delays", to_json(r)}};
    write_output(a.report, report.dump(2) + "\n");
    return r.conforming ? 0 : 2;
  }

  sim::PairOutcome outcome;
  ExperimentConfig cfg;
  if (a.experiment) {
    cfg = load_config_or_default(a.config);
    sim::PairSpec p;
    p.schedule = generate_schedule("sim", cfg, a.seed);
    p.options.config = cfg;
    p.options.deadlock_after = from_ms(10'000);
    p.options.session.task_slots = a.slots;
    p.bots = sim::default_bots(a.seed);
    for (auto& b : p.bots) b.stroke_duration = from_ms(a.stroke_ms);
    p.clock = clock;
    outcome = sim::run_pair(std::move(p));
  } else {
    sim::ConditionSpec spec;
    spec.condition = {*platform, *mode, a.latency_ms};
    spec.inherent_ms = di;
    spec.task_slots = a.slots;
    spec.templates =
        a.slots <= default_templates().slot_count() ? default_templates() : uniform_templates(a.slots);
    spec.bots = sim::default_bots(a.seed);
    spec.bots[0].fc_policy = *policy;
    for (auto& b : spec.bots) b.stroke_duration = from_ms(a.stroke_ms);
    if (*policy != sim::FcPolicy::InOrder) spec.bots[1].fc_policy = *policy;
    spec.clock = clock;
    cfg = sim::single_condition_config(spec.condition, di);
    outcome = sim::run_condition(spec).pair;
  }
  const auto delays = sim::delay_report(outcome.log.snapshot(), outcome.record, cfg);
  nlohmann::json conds = nlohmann::json::array();
  for (const auto& c : outcome.record.conditions) {
    nlohmann::json j = {{"index", c.index},
                        {"condition", to_json(c.condition)},
                        {"status", kConditionStatusTokens[static_cast<std::size_t>(c.status)]}};
    if (auto d = c.task_duration()) j["task_duration_ms"] = to_ms(*d);
    conds.push_back(std::move(j));
  }
  report = {{"conditions", std::move(conds)},
            {"ratings", outcome.record.ratings.size()},
            {"delays", to_json(delays)},
            {"wall_seconds", outcome.wall.count()},
            {"clock", a.virtual_clock ? "virtual" : "real"}};
  if (outcome.record.error) {
    report["error"] = to_string(*outcome.record.error);
    report["error_detail"] = outcome.record.error_detail;
  }
  if (!a.log_dir.empty()) {
    auto paths = export_run(outcome.record, outcome.log, a.log_dir);
    report["ratings_csv"] = paths.ratings_csv.string();
    report["session_log"] = paths.session_log.string();
    report["record"] = paths.record_json.string();
  }
  write_output(a.report, report.dump(2) + "\n");
  return outcome.record.error ? 1 : 0;
}

// --- analyze

int analyze(const std::string& ratings, const std::string& group_by, const std::string& stat,
            const std::string& out) {
  const auto file = load_ratings_csv(ratings);
  const auto g = GroupBy::parse(group_by);
  std::ostringstream os;
  if (stat == "mos") {
    const auto rows = aggregate(file.ratings, g);
    write_mos_csv(os, rows, g);
  } else if (stat == "h") {
    write_h_csv(os, file.ratings, g);
  } else if (stat == "anova") {
    write_anova_csv(os, file.ratings, g);
  } else if (stat == "r") {
    write_r_csv(os, file.ratings, g);
  } else if (stat == "t") {
    write_t_csv(os, file.ratings, g);
  } else {
    throw Error(Errc::InvalidConfig, "unknown stat '" + stat + "'");
  }
  write_output(out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latency-controlled collaborative whiteboard testbed"};
  app.require_subcommand(1);

  ServeArgs sa;
  auto* serve_cmd = app.add_subcommand("serve", "Run the WebSocket relay");
  serve_cmd->add_option("--host", sa.host, "Bind address");
  serve_cmd->add_option("--port", sa.port, "TCP port (0 picks a free port)");
  serve_cmd->add_option("--config", sa.config, "Experiment config JSON")->check(CLI::ExistingFile);
  serve_cmd->add_option("--templates", sa.templates, "Template set JSON")->check(CLI::ExistingFile);
  serve_cmd->add_option("--seed", sa.seed, "Service seed; per-pair schedules derive from it");
  serve_cmd->add_option("--log-dir", sa.log_dir, "Directory for per-pair logs and ratings");
  serve_cmd->add_flag("--virtual-clock", sa.virtual_clock, "Simulated time (test mode)");
  serve_cmd->add_option("--target-latency-ms", sa.target_latency_ms, "Run every condition at this latency");
  serve_cmd->add_option("--inherent-latency-ms", sa.inherent_latency_ms, "Inherent latency for all platforms");
  serve_cmd->add_option("--tick-rate", sa.tick_rate, "Injector drains per second");
  serve_cmd->add_option("--task-slots", sa.task_slots, "Restrict the task to the first N slots");
  serve_cmd->add_option("--rating-timeout-ms", sa.rating_timeout_ms, "Rating gate timeout");
  serve_cmd->add_option("--deadlock-ms", sa.deadlock_ms, "Abort a pair after this long without events");
  serve_cmd->add_option("--exit-after-pairs", sa.exit_after_pairs, "Exit once this many pairs finish");

  std::uint64_t sched_seed = 0;
  std::string sched_config, sched_pair = "pair";
  auto* sched_cmd = app.add_subcommand("schedule", "Print a pair's condition schedule");
  sched_cmd->add_option("--seed", sched_seed, "Schedule seed")->required();
  sched_cmd->add_option("--config", sched_config, "Experiment config JSON")->check(CLI::ExistingFile);
  sched_cmd->add_option("--pair", sched_pair, "Pair id");

  std::string run_dir, export_out;
  auto* export_cmd = app.add_subcommand("export", "Collect run records into one ratings CSV");
  export_cmd->add_option("--run-dir", run_dir, "Run directory or log directory")->required();
  export_cmd->add_option("--out", export_out, "Output CSV")->required();

  std::string ratings, group_by = "platform,mode,latency", stat = "mos", analyze_out;
  auto* analyze_cmd = app.add_subcommand("analyze", "Statistics over a ratings CSV");
  analyze_cmd->add_option("--ratings", ratings, "Ratings CSV")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--group-by", group_by, "Comma list of platform, mode, latency");
  analyze_cmd->add_option("--stat", stat, "mos | anova | h | r | t")
      ->check(CLI::IsMember({"mos", "anova", "h", "r", "t"}));
  analyze_cmd->add_option("--out", analyze_out, "Output CSV (default stdout)");

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Run scripted bots through the relay");
  sim_cmd->add_option("--mode", sim_args.mode, "sc | fc")->check(CLI::IsMember({"sc", "fc"}));
  sim_cmd->add_option("--platform", sim_args.platform, "vr_plus | vr | pc");
  sim_cmd->add_option("--latency-ms", sim_args.latency_ms, "Target latency");
  sim_cmd->add_option("--inherent-ms", sim_args.inherent_ms, "Inherent latency (default per platform)");
  sim_cmd->add_option("--slots", sim_args.slots, "Task slots");
  sim_cmd->add_option("--stroke-ms", sim_args.stroke_ms, "Time to draw one slot");
  sim_cmd->add_option("--seed", sim_args.seed, "Seed");
  sim_cmd->add_flag("--virtual-clock", sim_args.virtual_clock, "Simulated time");
  sim_cmd->add_option("--fc-policy", sim_args.fc_policy, "in_order | reverse_order | random | adversarial");
  sim_cmd->add_option("--report", sim_args.report, "Report JSON (default stdout)");
  sim_cmd->add_option("--log-dir", sim_args.log_dir, "Export logs and ratings here");
  sim_cmd->add_option("--messages", sim_args.messages, "Measure injected delay over N presence messages");
  sim_cmd->add_flag("--experiment", sim_args.experiment, "Run the full condition schedule");
  sim_cmd->add_option("--config", sim_args.config, "Experiment config JSON (with --experiment)");

  BotArgs ba;
  auto* bot_cmd = app.add_subcommand("bot", "Connect one scripted participant to a relay");
  bot_cmd->add_option("--host", ba.host, "Relay host");
  bot_cmd->add_option("--port", ba.port, "Relay port");
  bot_cmd->add_option("--pair", ba.pair, "Pair code")->required();
  bot_cmd->add_option("--id", ba.id, "Participant id")->required();
  bot_cmd->add_option("--stroke-ms", ba.stroke_ms, "Time to draw one slot");
  bot_cmd->add_option("--fc-policy", ba.fc_policy, "in_order | reverse_order | random | adversarial");
  bot_cmd->add_option("--score", ba.score, "Fixed rating score (default seeded random)");
  bot_cmd->add_option("--rating-delay-ms", ba.rating_delay_ms, "Delay before rating");
  bot_cmd->add_option("--seed", ba.seed, "Seed");
  bot_cmd->add_flag("--presence", ba.presence, "Send presence while drawing");

  std::string cal_host = "127.0.0.1", cal_port = "8080";
  int cal_probes = 20;
  double cal_processing = 0.0;
  auto* cal_cmd = app.add_subcommand("calibrate", "Estimate inherent latency from clock probes");
  cal_cmd->add_option("--host", cal_host, "Relay host");
  cal_cmd->add_option("--port", cal_port, "Relay port");
  cal_cmd->add_option("--probes", cal_probes, "Probe count (at least 10)");
  cal_cmd->add_option("--processing-ms", cal_processing, "Relay processing time to add");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(sa);
    if (*sched_cmd) {
      const auto cfg = load_config_or_default(sched_config);
      std::cout << to_json(generate_schedule(sched_pair, cfg, sched_seed)).dump(2) << '\n';
      return 0;
    }
    if (*export_cmd) {
      const auto rows = export_ratings(run_dir, export_out);
      std::cerr << rows << " rows written to " << export_out << '\n';
      return 0;
    }
    if (*analyze_cmd) return analyze(ratings, group_by, stat, analyze_out);
    if (*sim_cmd) return simulate(sim_args);
    if (*bot_cmd) return bot(ba);
    if (*cal_cmd) return calibrate(cal_host, cal_port, cal_probes, cal_processing);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
