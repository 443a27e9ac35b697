#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "faraday/sim.hpp"

using namespace faraday;
using namespace faraday::sim;

namespace {

const std::filesystem::path kScenarios = FARADAY_SCENARIO_DIR;

Json load_json(const std::string& name) {
  std::ifstream in(kScenarios / (name + ".json"));
  REQUIRE(in);
  return Json::parse(in);
}

Json run_metrics(const Json& j) {
  Simulation sim(parse_scenario(j));
  sim.run();
  return metrics(sim);
}

std::string invalid_message(const Json& j) {
  try {
    parse_scenario(j);
  } catch (const InvalidScenario& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("every bundled scenario passes and is deterministic") {
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kScenarios)) {
    if (entry.path().extension() != ".json") continue;
    ++count;
    CAPTURE(entry.path().filename().string());
    const auto scenario = load_scenario(entry.path().string());
    const auto a = run_scenario(scenario);
    const auto b = run_scenario(scenario);
    CHECK(a.passed);
    CHECK(a.report.dump() == b.report.dump());
    CHECK(a.report["outcome"]["key_conservation"] == true);
  }
  CHECK(count >= 9);
}

TEST_CASE("seed changes the run") {
  auto j = load_json("batch4");
  const auto a = run_scenario(parse_scenario(j)).report;
  j["seed"] = 5;
  const auto b = run_scenario(parse_scenario(j)).report;
  CHECK(a["nodes"][0]["identity"] != b["nodes"][0]["identity"]);
  CHECK(a["outcome"]["provisioned"] == b["outcome"]["provisioned"]);
}

TEST_CASE("scenario validation") {
  const auto base = load_json("batch4");
  CHECK(invalid_message(base).empty());

  auto j = base;
  j["colour"] = "blue";
  CHECK(invalid_message(j).find("unknown field 'colour'") != std::string::npos);

  j = base;
  j["box"]["calibration_distance_cm"] = 30;
  CHECK(invalid_message(j).find("calibration infeasible") != std::string::npos);

  j = base;
  std::swap(j["script"][0], j["script"][1]);
  CHECK(invalid_message(j).find("time order") != std::string::npos);

  j = base;
  j["script"][0]["action"] = "dance";
  CHECK(invalid_message(j).find("unknown action 'dance'") != std::string::npos);

  j = base;
  j["assertions"][0]["op"] = "~=";
  CHECK(invalid_message(j).find("unknown operator") != std::string::npos);

  j = base;
  j["nodes"][1]["id"] = "node1";
  CHECK(invalid_message(j).find("duplicate id") != std::string::npos);

  j = base;
  j.erase("seed");
  CHECK(invalid_message(j).find("missing seed") != std::string::npos);

  j = base;
  j["script"].push_back({{"at_s", 500}, {"action", "place_node"}, {"node", "ghost"}});
  CHECK(invalid_message(j).find("unknown node") != std::string::npos);

  CHECK_THROWS_AS(load_scenario((kScenarios / "missing.json").string()), InvalidScenario);
}

TEST_CASE("unknown metric is an invalid scenario") {
  auto j = load_json("empty_box");
  j["assertions"] = Json::array({{{"name", "x"}, {"metric", "nonsense"}, {"op", "=="}, {"value", 1}}});
  CHECK_THROWS_AS(run_scenario(parse_scenario(j)), InvalidScenario);
}

TEST_CASE("failing assertions are reported") {
  auto j = load_json("empty_box");
  j["assertions"] = Json::array({{{"name", "wrong"}, {"metric", "keys_spent"}, {"op", "=="}, {"value", 3}},
                                 {{"name", "right"}, {"metric", "keys_spent"}, {"op", "<=", }, {"value", 3}}});
  const auto out = run_scenario(parse_scenario(j));
  CHECK_FALSE(out.passed);
  REQUIRE(out.assertions.size() == 2);
  CHECK_FALSE(out.assertions[0].passed);
  CHECK(out.assertions[1].passed);
  CHECK(out.report["passed"] == false);
}

TEST_CASE("the box follows the nodes' factory paths") {
  auto j = load_json("batch4");
  j["assertions"] = Json::array();
  j["factory"] = {{"paths", {{"bootloader", "/fw/boot"}, {"erasure", "/fw/wipe"}, {"runtime", "/fw/app"}}}};
  Simulation sim(parse_scenario(j));
  CHECK(sim.box().config().paths.erasure == "/fw/wipe");
  sim.run();
  CHECK(metrics(sim)["provisioned"] == 4);
  j["box"]["paths"] = Json::object();
  CHECK(invalid_message(j).find("unknown field 'paths'") != std::string::npos);
}

TEST_CASE("shielding decides the rogue outcome") {
  for (const double shielding : {40.0, 70.0}) {
    CAPTURE(shielding);
    auto j = load_json("rogue");
    j["box"]["shielding_db"] = shielding;
    j["assertions"] = Json::array();
    const auto m = run_metrics(j);
    if (shielding == 40.0) {
      CHECK(m["rogue_joins"].get<int>() >= 1);
      CHECK(m["nodes_compromised"].get<int>() >= 1);
    } else {
      CHECK(m["rogue_joins"] == 0);
      CHECK(m["nodes_compromised"] == 0);
      CHECK(m["provisioned"] == 3);
    }
    CHECK(m["rogue_warning"] == true);
  }
}

TEST_CASE("batch metrics") {
  const auto m = run_metrics(load_json("batch4"));
  CHECK(m["provisioned"] == 4);
  CHECK(m["distinct_keys"] == 4);
  CHECK(m["identity_bijection"] == true);
  CHECK(m["eavesdropper_decoded_in_box_bytes"] == 0);
  CHECK(m["eavesdropper_key_matches"] == 0);
  CHECK(m["telemetry_accepted"] == 4);
  CHECK(m["backend_in_use"] == 4);
  CHECK(m["parallel_faster"] == true);
  const auto report = run_scenario(parse_scenario(load_json("batch4"))).report;
  const auto eve = report["eavesdroppers"]["eve"];
  CHECK(eve["frames"].get<int>() > 0);
  CHECK(eve["best_in_box_prx_dbm"].get<double>() < -96.0);
}

TEST_CASE("a leaky box lets the eavesdropper read keys") {
  auto j = load_json("batch4");
  j["box"]["shielding_db"] = 0;
  j["box"]["hw_attenuation_db"] = 0;
  j["assertions"] = Json::array();
  const auto m = run_metrics(j);
  CHECK(m["eavesdropper_decoded_in_box_bytes"].get<int>() > 0);
  CHECK(m["eavesdropper_key_matches"].get<int>() >= 1);
}

namespace {

Json get_json(httplib::Client& c, const std::string& path) {
  const auto r = c.Get(path);
  REQUIRE(r);
  REQUIRE(r->status == 200);
  return Json::parse(r->body);
}

int post_status(httplib::Client& c, const std::string& path, const Json& body) {
  const auto r = c.Post(path, body.dump(), "application/json");
  REQUIRE(r);
  return r->status;
}

}  // namespace

TEST_CASE("interactive server") {
  auto j = load_json("rogue_shielded");
  j["script"] = Json::array();
  j["assertions"] = Json::array();
  ServeOptions opts;
  opts.port = 0;
  opts.time_scale = 50;
  InteractiveServer server(parse_scenario(j), opts);
  const int port = server.start();
  REQUIRE(port > 0);
  httplib::Client c("127.0.0.1", port);
  c.set_read_timeout(5, 0);

  auto nodes = get_json(c, "/sim/nodes");
  REQUIRE(nodes["nodes"].size() == 3);
  CHECK(nodes["nodes"][0]["id"] == "node1");
  CHECK(nodes["nodes"][0]["inside"] == false);
  CHECK(nodes["lid_open"] == true);

  CHECK(post_status(c, "/box/event", {{"kind", "PowerOn"}}) == 200);
  CHECK(get_json(c, "/box/state")["state"] == "BoxOpen_NoFW");
  CHECK(post_status(c, "/box/event", {{"kind", "DeployTimeout"}}) == 422);
  CHECK(post_status(c, "/sim/place", {{"nodes", {"node1", "node2"}}}) == 200);
  CHECK(post_status(c, "/sim/place", {{"node", "ghost"}}) == 409);
  CHECK(post_status(c, "/sim/attacker", {{"name", "nobody"}, {"active", true}}) == 404);
  CHECK(post_status(c, "/sim/attacker", {{"name", "rogue"}, {"active", false}}) == 200);
  CHECK(get_json(c, "/sim/attacker")[0]["active"] == false);
  CHECK(post_status(c, "/box/event", {{"kind", "PressAcquire"}}) == 200);

  // Wait for the acquire to land in simulated time.
  for (int i = 0; i < 200 && get_json(c, "/box/state")["state"] != "BoxOpen_FW"; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  CHECK(get_json(c, "/box/state")["state"] == "BoxOpen_FW");
  CHECK(post_status(c, "/box/event", {{"kind", "PressDeploy"}}) == 200);
  CHECK(post_status(c, "/box/event", {{"kind", "LidClosed"}}) == 200);
  CHECK(post_status(c, "/sim/remove", {{"node", "node1"}}) == 409);
  CHECK(get_json(c, "/sim/nodes")["nodes"][0]["inside"] == true);

  const auto t0 = get_json(c, "/sim/clock")["t_s"].get<double>();
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  CHECK(get_json(c, "/sim/clock")["t_s"].get<double>() > t0);

  const auto transcript = get_json(c, "/box/transcript?since=0");
  REQUIRE(transcript["entries"].size() >= 2);

  // The event stream replays the transcript and then pushes state.
  std::string received;
  httplib::Client sc("127.0.0.1", port);
  sc.set_read_timeout(5, 0);
  sc.Get("/sim/events?since=0", [&](const char* data, std::size_t len) {
    received.append(data, len);
    return received.find("event: state") == std::string::npos;
  });
  CHECK(received.find("id: 1\nevent: utterance\ndata: ") != std::string::npos);
  CHECK(received.find("\"acquiring\"") != std::string::npos);
  CHECK(received.find("event: state") != std::string::npos);

  std::string later;
  sc.Get("/sim/events?since=" + std::to_string(transcript["last_seq"].get<int>()),
         [&](const char* data, std::size_t len) {
           later.append(data, len);
           return later.find("event: state") == std::string::npos;
         });
  CHECK(later.find("id: 1\n") == std::string::npos);

  server.stop();
}
