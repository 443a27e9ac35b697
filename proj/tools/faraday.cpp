#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "faraday/backend.hpp"
#include "faraday/radio.hpp"
#include "faraday/sim.hpp"

using namespace faraday;
using Json = nlohmann::ordered_json;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

void wait_for_signal() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

int cmd_run(const std::string& path, bool deterministic, const std::string& report_path) {
  sim::Scenario scenario;
  try {
    scenario = sim::load_scenario(path);
    sim::validate_scenario(scenario);
  } catch (const std::exception& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    return sim::kExitInvalidScenario;
  }
  sim::RunOutcome out;
  try {
    out = sim::run_scenario(scenario, deterministic);
  } catch (const sim::InvalidScenario& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    return sim::kExitInvalidScenario;
  }
  if (!report_path.empty()) {
    std::ofstream f(report_path);
    if (!f) {
      std::cerr << "cannot write " << report_path << "\n";
      return sim::kExitInvalidScenario;
    }
    f << out.report.dump(2) << "\n";
  }
  const auto& o = out.report["outcome"];
  std::cout << "scenario " << scenario.name << " (seed " << scenario.seed << ")\n"
            << "  final state        " << o["final_state"].get<std::string>() << "\n"
            << "  provisioned        " << o["provisioned"] << "\n"
            << "  compromised        " << o["nodes_compromised"] << "\n"
            << "  eavesdropper bytes " << o["eavesdropper_decoded_in_box_bytes"] << "\n";
  for (const auto& a : out.assertions) {
    std::cout << (a.passed ? "PASS " : "FAIL ") << a.name << ": " << a.detail << "\n";
  }
  return out.passed ? sim::kExitPass : sim::kExitAssertionFailed;
}

struct LinkArgs {
  radio::LinkBudget budget;
  radio::ChannelParams channel;
  double sensitivity = -90.0;
};

int cmd_linkbudget(const LinkArgs& a, bool json_only) {
  radio::ReceptionVerdict v;
  try {
    v = radio::reception_verdict(a.budget, a.channel, a.sensitivity);
  } catch (const std::exception& e) {
    std::cerr << "invalid link budget: " << e.what() << "\n";
    return 2;
  }
  const double fspl = radio::fspl_db(a.budget.distance_cm, a.budget.freq_mhz);
  const Json j{{"ptx_dbm", a.budget.ptx_dbm},
               {"gtx_db", a.budget.gtx_db},
               {"grx_db", a.budget.grx_db},
               {"lbox_db", a.budget.lbox_db},
               {"distance_cm", a.budget.distance_cm},
               {"freq_mhz", a.budget.freq_mhz},
               {"bandwidth_hz", a.channel.bandwidth_hz},
               {"data_rate_bps", a.channel.data_rate_bps},
               {"rx_sensitivity_dbm", a.sensitivity},
               {"fspl_db", fspl},
               {"prx_dbm", v.prx_dbm},
               {"noise_floor_dbm", v.noise_floor_dbm},
               {"snr_db", v.snr_db},
               {"required_snr_db", v.required_snr_db},
               {"above_sensitivity", v.above_sensitivity},
               {"above_capacity_threshold", v.above_capacity_threshold},
               {"decodable", v.decodable}};
  if (!json_only) {
    const auto row = [](const char* label, double value, const char* unit) {
      std::printf("  %-22s %10.4f %s\n", label, value, unit);
    };
    row("free-space path loss", fspl, "dB");
    row("received power", v.prx_dbm, "dBm");
    row("noise floor", v.noise_floor_dbm, "dBm");
    row("SNR", v.snr_db, "dB");
    row("required SNR", v.required_snr_db, "dB");
    std::printf("  %-22s %10s (sensitivity %.1f dBm)\n", "above sensitivity", v.above_sensitivity ? "yes" : "no",
                a.sensitivity);
    std::printf("  %-22s %10s\n", "above capacity", v.above_capacity_threshold ? "yes" : "no");
    std::printf("  %-22s %10s\n", "decodable", v.decodable ? "YES" : "NO");
  }
  std::cout << j.dump() << std::endl;
  return 0;
}

struct BackendArgs {
  std::string state_file = "backend-state.json";
  std::string listen;
  std::string box_token = "box-shared-token";
  double blacklist_hours = 24;
  std::string ssid;
  std::string passphrase;
  std::string server_address;
  std::size_t create_keys = 0;
  std::vector<std::string> templates;  // name=size
  std::size_t bootloader_size = 16 * 1024;
  std::string bootloader_name = "ota-bootloader";
};

SimTime wall_now() {
  return std::chrono::duration_cast<SimTime>(std::chrono::system_clock::now().time_since_epoch());
}

int cmd_backend(const BackendArgs& a) {
  backend::BackendConfig cfg;
  cfg.box_token = a.box_token;
  cfg.blacklist_timeout = seconds(a.blacklist_hours * 3600);
  if (!a.ssid.empty()) cfg.credentials.ssid = a.ssid;
  if (!a.passphrase.empty()) cfg.credentials.passphrase = a.passphrase;
  if (!a.server_address.empty()) cfg.credentials.server_address = a.server_address;
  backend::Backend be(cfg);
  const std::filesystem::path state(a.state_file);
  if (std::filesystem::exists(state)) be.load(state);

  crypto::SystemRandom rng;
  bool changed = false;
  if (a.create_keys > 0) {
    be.create_keys(a.create_keys, rng);
    changed = true;
  }
  for (const auto& t : a.templates) {
    const auto eq = t.find('=');
    const auto name = t.substr(0, eq);
    const std::size_t size = eq == std::string::npos ? 64 * 1024 : std::stoul(t.substr(eq + 1));
    be.build_and_register_template(name, size);
    changed = true;
  }
  if (!be.image(a.bootloader_name)) {
    be.register_image(backend::build_bootloader_base(a.bootloader_name, a.bootloader_size));
    changed = true;
  }
  if (changed) be.save(state);

  const auto s = be.status();
  std::cout << "keys: fresh " << s.fresh << ", issued " << s.issued_to_box << ", in use " << s.in_use
            << ", blacklisted " << s.blacklisted << "\n";
  if (a.listen.empty()) return 0;

  // Every mutating request is followed by an atomic state file write.
  std::mutex save_mu;
  const auto inner = be.router(wall_now);
  const auto persist = [&](net::Response r) {
    std::lock_guard lock(save_mu);
    be.save(state);
    return r;
  };
  net::Router outer;
  outer.add("GET", "/firmware/{name}", [&](const net::Request& q, const net::PathParams&) { return inner.handle(q); });
  outer.add("GET", "/status", [&](const net::Request& q, const net::PathParams&) { return inner.handle(q); });
  outer.add("GET", "/keys", [&](const net::Request& q, const net::PathParams&) { return persist(inner.handle(q)); });
  outer.add("POST", "/readings",
            [&](const net::Request& q, const net::PathParams&) { return persist(inner.handle(q)); });

  std::atomic<bool> stop{false};
  std::thread sweeper([&] {
    while (!stop) {
      if (!be.blacklist_sweep(wall_now()).empty()) persist(net::Response{});
      for (int i = 0; i < 600 && !stop; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  });

  const auto [host, port] = net::parse_listen(a.listen);
  net::HttpServer server(outer);
  const int bound = server.start(host, port);
  std::cout << "backend listening on " << host << ":" << bound << std::endl;
  wait_for_signal();
  server.stop();
  stop = true;
  sweeper.join();
  be.save(state);
  return 0;
}

int cmd_serve(const std::string& path, const std::string& listen, double time_scale) {
  sim::Scenario scenario;
  try {
    scenario = sim::load_scenario(path);
    sim::validate_scenario(scenario);
  } catch (const std::exception& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    return sim::kExitInvalidScenario;
  }
  sim::ServeOptions opts;
  std::tie(opts.host, opts.port) = net::parse_listen(listen);
  opts.time_scale = time_scale;
  sim::InteractiveServer server(std::move(scenario), opts);
  const int port = server.start();
  std::cout << "serving " << path << " on " << opts.host << ":" << port << " (time scale " << time_scale << ")"
            << std::endl;
  wait_for_signal();
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shielded-box sensor provisioning: simulator, link budget and backend service"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario and check its assertions");
  std::string scenario_path, report_path;
  bool deterministic = false;
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_flag("--deterministic", deterministic, "Seed all randomness from the scenario seed");
  run->add_option("--report", report_path, "Write the run report to this file");

  auto* lb = app.add_subcommand("linkbudget", "Received power, SNR and decodability of one link");
  LinkArgs link;
  bool json_only = false;
  lb->add_option("--ptx", link.budget.ptx_dbm, "Transmit power (dBm)")->capture_default_str();
  lb->add_option("--gtx", link.budget.gtx_db, "Transmit antenna gain (dB)")->capture_default_str();
  lb->add_option("--grx", link.budget.grx_db, "Receive antenna gain (dB)")->capture_default_str();
  lb->add_option("--lbox", link.budget.lbox_db, "Enclosure shielding (dB)")->capture_default_str();
  lb->add_option("--distance-cm", link.budget.distance_cm, "Distance (cm)")->capture_default_str();
  lb->add_option("--freq-mhz", link.budget.freq_mhz, "Carrier frequency (MHz)")->capture_default_str();
  lb->add_option("--bandwidth-hz", link.channel.bandwidth_hz, "Channel bandwidth (Hz)")->capture_default_str();
  lb->add_option("--rate-bps", link.channel.data_rate_bps, "Data rate (bit/s)")->capture_default_str();
  lb->add_option("--sensitivity", link.sensitivity, "Receiver sensitivity (dBm)")->capture_default_str();
  lb->add_flag("--json", json_only, "Print only the JSON record");

  auto* be = app.add_subcommand("backend", "Manage the key database and serve the backend API");
  BackendArgs bargs;
  be->add_option("--state-file", bargs.state_file, "Database snapshot")->capture_default_str();
  be->add_option("--listen", bargs.listen, "Serve on host:port");
  be->add_option("--box-token", bargs.box_token, "Token the Box presents")->capture_default_str();
  be->add_option("--blacklist-hours", bargs.blacklist_hours, "Hours before an unused key is blacklisted")
      ->capture_default_str();
  be->add_option("--ssid", bargs.ssid, "Field network SSID embedded in runtime templates");
  be->add_option("--passphrase", bargs.passphrase, "Field network passphrase embedded in runtime templates");
  be->add_option("--server-address", bargs.server_address, "Backend address embedded in runtime templates");
  be->add_option("--create-keys", bargs.create_keys, "Generate this many fresh keys");
  be->add_option("--template", bargs.templates, "Build a runtime template, name=size");

  auto* serve = app.add_subcommand("serve", "Interactive simulation for the operator panel");
  std::string serve_scenario, listen = "127.0.0.1:8080";
  double time_scale = 1.0;
  serve->add_option("--scenario", serve_scenario, "Scenario JSON file")->required();
  serve->add_option("--listen", listen, "host:port")->capture_default_str();
  serve->add_option("--time-scale", time_scale, "Simulated seconds per wall second")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(scenario_path, deterministic, report_path);
    if (*lb) return cmd_linkbudget(link, json_only);
    if (*be) return cmd_backend(bargs);
    if (*serve) return cmd_serve(serve_scenario, listen, time_scale);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
