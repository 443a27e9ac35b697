#include <set>

#include "faraday/sim.hpp"

namespace faraday::sim {

namespace {

bool box_provisioned(const node::SensorNode& n, const crypto::VerifyingKey& box_key) {
  return n.mode() == node::Mode::Runtime && n.installed_pubkey() && *n.installed_pubkey() == box_key;
}

Json summary_json(const EavesdropSummary& s) {
  return Json{{"frames", s.frames},
              {"decodable_frames", s.decodable_frames},
              {"decoded_in_box_bytes", s.decoded_in_box_bytes},
              {"decoded_uplink_bytes", s.decoded_uplink_bytes},
              {"decoded_field_bytes", s.decoded_field_bytes},
              {"key_pattern_matches", s.key_pattern_matches},
              {"best_in_box_prx_dbm", s.frames ? Json(s.best_in_box_prx_dbm) : Json(nullptr)}};
}

bool has_utterance(const std::vector<box::SpeakerEntry>& t, box::UtteranceId id) {
  for (const auto& e : t) {
    if (e.id == id) return true;
  }
  return false;
}

}  // namespace

Json metrics(const Simulation& sim) {
  const auto& box = sim.box();
  const auto box_key = box.verifying_key();
  const auto counts = box.counts();
  const auto session = box.session();
  const auto transcript = box.transcript();
  const auto keys = sim.issued_keys();

  std::size_t runtime = 0, compromised = 0, rejected_images = 0;
  std::set<std::string> distinct;
  std::map<crypto::KeyIdentity, const node::SensorNode*> by_identity;
  for (const auto& n : sim.nodes()) {
    const auto& node = *n.node;
    rejected_images += node.rejected_images();
    if (node.installed_pubkey() && !(*node.installed_pubkey() == box_key)) ++compromised;
    if (!box_provisioned(node, box_key)) continue;
    ++runtime;
    distinct.insert(to_hex(node.key()->view()));
    by_identity[*node.identity()] = &node;
  }

  // Every provisioned node's identity names a key the backend issued and
  // has seen in use, and nothing else is in use.
  std::size_t in_use = 0;
  bool bijection = true;
  const auto records = sim.backend().records();
  for (const auto& r : records) {
    if (r.state != backend::KeyState::InUse) continue;
    ++in_use;
    auto it = by_identity.find(r.identity);
    if (it == by_identity.end() || !(*it->second->key() == r.key)) bijection = false;
  }
  if (in_use != by_identity.size()) bijection = false;

  EavesdropSummary eve;
  for (const auto& [name, log] : sim.eavesdrop_logs()) {
    const auto s = log.summarize(keys);
    eve.frames += s.frames;
    eve.decodable_frames += s.decodable_frames;
    eve.decoded_in_box_bytes += s.decoded_in_box_bytes;
    eve.decoded_uplink_bytes += s.decoded_uplink_bytes;
    eve.decoded_field_bytes += s.decoded_field_bytes;
    eve.key_pattern_matches += s.key_pattern_matches;
  }

  std::set<std::string> rogue_joins;
  std::size_t rogue_images = 0;
  for (const auto& r : sim.rogues()) {
    rogue_joins.insert(r.joined_by.begin(), r.joined_by.end());
    rogue_images += r.server->images_served();
  }

  SimTime first = SimTime::max(), last = SimTime::min(), serial{};
  for (const auto& e : sim.exchanges()) {
    first = std::min(first, e.start);
    last = std::max(last, e.end);
    serial += e.end - e.start;
  }
  const double parallel_s = sim.exchanges().empty() ? 0.0 : to_seconds(last - first);
  const double serial_s = to_seconds(serial);

  const auto status = sim.backend().status();
  Json texts = Json::array();
  for (const auto& e : transcript) texts.push_back(e.text);

  const std::size_t conserved = counts.spent + counts.keys + counts.erased;
  return Json{{"final_state", to_string(box.state())},
              {"provisioned", session.runtime_flashed},
              {"nodes_runtime", runtime},
              {"nodes_compromised", compromised},
              {"distinct_keys", distinct.size()},
              {"erasure_failed", session.erasure_failed},
              {"rejected_images", rejected_images},
              {"keys_acquired", counts.acquired},
              {"keys_spent", counts.spent},
              {"keys_remaining", counts.keys},
              {"keys_erased", counts.erased},
              {"key_conservation", conserved == counts.acquired},
              {"eavesdropper_frames", eve.frames},
              {"eavesdropper_decoded_in_box_bytes", eve.decoded_in_box_bytes},
              {"eavesdropper_decoded_uplink_bytes", eve.decoded_uplink_bytes},
              {"eavesdropper_decoded_field_bytes", eve.decoded_field_bytes},
              {"eavesdropper_key_matches", eve.key_pattern_matches},
              {"rogue_joins", rogue_joins.size()},
              {"rogue_images_served", rogue_images},
              {"rogue_warning", has_utterance(transcript, box::UtteranceId::RogueWarning)},
              {"panic_warning", has_utterance(transcript, box::UtteranceId::PanicAbort)},
              {"out_of_keys", has_utterance(transcript, box::UtteranceId::OutOfKeys)},
              {"no_nodes_found", has_utterance(transcript, box::UtteranceId::NoNodesFound)},
              {"telemetry_accepted", status.readings},
              {"telemetry_rejected", status.unknown_identity + status.auth_failures + status.rejected},
              {"identity_bijection", bijection},
              {"backend_fresh", status.fresh},
              {"backend_issued", status.issued_to_box},
              {"backend_in_use", status.in_use},
              {"backend_blacklisted", status.blacklisted},
              {"ota_parallel_s", parallel_s},
              {"ota_serial_s", serial_s},
              {"parallel_faster", parallel_s < serial_s},
              {"transcript", texts}};
}

Json Simulation::report() const {
  const auto box_key = box_->verifying_key();
  Json nodes = Json::array();
  for (const auto& n : nodes_) {
    const auto& node = *n.node;
    Json j{{"id", n.spec.id},
           {"mac", node.mac().str()},
           {"honesty", to_string(node.config().honesty)},
           {"mode", to_string(node.mode())},
           {"phase", to_string(node.phase())},
           {"inside", n.inside},
           {"in_field", n.in_field},
           {"provisioned_by_box", box_provisioned(node, box_key)},
           {"joined_rogue", n.joined_rogue ? Json(*n.joined_rogue) : Json(nullptr)},
           {"identity", node.identity() ? Json(node.identity()->hex()) : Json(nullptr)},
           {"runtime_image", node.runtime_image_name()},
           {"boot_counter", node.boot_counter()},
           {"exchanges", n.exchanges},
           {"rejected_images", node.rejected_images()},
           {"erasure_rejected", node.erasure_rejected()},
           {"readings_sent", n.readings_sent},
           {"readings_accepted", n.readings_accepted},
           {"reading_results", n.reading_results}};
    nodes.push_back(std::move(j));
  }

  const auto keys = issued_keys();
  Json eaves = Json::object();
  for (const auto& [name, log] : eavesdrop_) eaves[name] = summary_json(log.summarize(keys));

  Json rogues = Json::object();
  for (const auto& r : rogues_) {
    rogues[r.spec.name] = Json{{"active", r.spec.active},
                               {"requests", r.server->requests()},
                               {"images_served", r.server->images_served()},
                               {"joined_by", Json(std::vector<std::string>(r.joined_by.begin(), r.joined_by.end()))}};
  }

  Json transcript = Json::array();
  for (const auto& e : box_->transcript()) {
    transcript.push_back({{"seq", e.seq}, {"t_s", to_seconds(e.at)}, {"id", to_string(e.id)}, {"text", e.text}});
  }

  const auto status = backend_->status();
  auto outcome = metrics(*this);
  outcome.erase("transcript");
  return Json{{"scenario", scenario_.name},
              {"seed", scenario_.seed},
              {"mode", deterministic_ ? "deterministic" : "live"},
              {"box",
               {{"radio_ptx_dbm", box_radio_.radio_ptx_dbm},
                {"antenna_ptx_dbm", box_radio_.antenna_ptx_dbm},
                {"state", Json::parse(box::state_json(*box_))},
                {"session", Json::parse(box::session_json(*box_))}}},
              {"outcome", outcome},
              {"nodes", nodes},
              {"eavesdroppers", eaves},
              {"rogues", rogues},
              {"backend",
               {{"fresh", status.fresh},
                {"issued_to_box", status.issued_to_box},
                {"in_use", status.in_use},
                {"blacklisted", status.blacklisted},
                {"readings", status.readings},
                {"unknown_identity", status.unknown_identity},
                {"auth_failures", status.auth_failures},
                {"rejected", status.rejected}}},
              {"transcript", transcript},
              {"log", log_}};
}

AssertionResult evaluate(const AssertionSpec& spec, const Json& m) {
  if (!m.contains(spec.metric)) throw InvalidScenario("assertion " + spec.name + ": unknown metric " + spec.metric);
  AssertionResult r;
  r.name = spec.name;
  r.actual = m[spec.metric];
  const auto& a = r.actual;
  const auto& v = spec.value;
  const auto& op = spec.op;
  if (op == "contains" || op == "not_contains") {
    bool found = false;
    const auto needle = v.is_string() ? v.get<std::string>() : v.dump();
    if (a.is_array()) {
      for (const auto& item : a) {
        if (item.is_string() && item.get<std::string>().find(needle) != std::string::npos) found = true;
      }
    } else if (a.is_string()) {
      found = a.get<std::string>().find(needle) != std::string::npos;
    }
    r.passed = op == "contains" ? found : !found;
  } else if (op == "==") {
    r.passed = a.is_number() && v.is_number() ? a.get<double>() == v.get<double>() : a == v;
  } else if (op == "!=") {
    r.passed = a.is_number() && v.is_number() ? a.get<double>() != v.get<double>() : a != v;
  } else {
    if (!a.is_number() || !v.is_number()) throw InvalidScenario("assertion " + spec.name + ": " + op + " needs numbers");
    const double x = a.get<double>(), y = v.get<double>();
    r.passed = op == ">=" ? x >= y : op == "<=" ? x <= y : op == ">" ? x > y : op == "<" ? x < y : false;
  }
  r.detail = spec.metric + " " + op + " " + v.dump() + " (actual " + (a.is_array() ? "[...]" : a.dump()) + ")";
  return r;
}

RunOutcome run_scenario(const Scenario& scenario, bool deterministic) {
  Simulation sim(scenario, deterministic);
  sim.run();
  RunOutcome out;
  out.report = sim.report();
  const auto m = metrics(sim);
  Json results = Json::array();
  for (const auto& spec : scenario.assertions) {
    auto r = evaluate(spec, m);
    out.passed = out.passed && r.passed;
    results.push_back({{"name", r.name}, {"passed", r.passed}, {"check", r.detail}});
    out.assertions.push_back(std::move(r));
  }
  out.report["assertions"] = results;
  out.report["passed"] = out.passed;
  return out;
}

}  // namespace faraday::sim
