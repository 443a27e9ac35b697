#include <fstream>
#include <set>
#include <sstream>

#include "faraday/sim.hpp"

namespace faraday::sim {

namespace {

const std::set<std::string> kActions{
    "power_on",      "lid_open",       "lid_close",     "press_acquire", "press_deploy",
    "place_node",    "remove_node",    "remove_nodes",  "deploy_field",  "send_readings",
    "replay_reading", "enter_bootloader", "blacklist_sweep", "backend_offline", "backend_online",
    "attacker_on",   "attacker_off",   "note"};

const std::set<std::string> kNodeActions{"place_node", "remove_node", "replay_reading", "enter_bootloader"};

[[noreturn]] void invalid(const std::string& where, const std::string& what) {
  throw InvalidScenario(where + ": " + what);
}

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where);

template <typename T>
T get(const Json& obj, const char* key, const T& fallback, const std::string& where) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  try {
    return obj[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    invalid(where + "." + key, "wrong type");
  }
}

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) invalid(where, "must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) invalid(where, "unknown field '" + k + "'");
  }
}

box::OtaPaths parse_paths(const Json& j, box::OtaPaths p, const std::string& w) {
  check_keys(j, {"bootloader", "erasure", "runtime"}, w);
  p.bootloader = get(j, "bootloader", p.bootloader, w);
  p.erasure = get(j, "erasure", p.erasure, w);
  p.runtime = get(j, "runtime", p.runtime, w);
  return p;
}

BoxParams parse_box(const Json& j) {
  const std::string w = "box";
  check_keys(j, {"ssid", "channel", "bssid", "key_threshold", "deploy_timeout_s", "shielding_db",
                 "hw_attenuation_db", "target_prx_dbm", "calibration_distance_cm", "max_ptx_dbm", "gain_db",
                 "rx_sensitivity_dbm", "freq_mhz", "bandwidth_hz", "rate_bps", "acquire_key_count",
                 "runtime_images", "bootloader_image"},
             w);
  BoxParams p;
  auto& c = p.config;
  c.ssid = get(j, "ssid", c.ssid, w);
  c.channel = get(j, "channel", c.channel, w);
  if (j.contains("bssid")) {
    try {
      c.bssid = box::MacAddress::parse(get<std::string>(j, "bssid", "", w));
    } catch (const DecodeError& e) {
      invalid(w + ".bssid", e.what());
    }
  }
  c.key_threshold = get(j, "key_threshold", c.key_threshold, w);
  c.deploy_timeout = seconds(get(j, "deploy_timeout_s", to_seconds(c.deploy_timeout), w));
  c.acquire_key_count = get(j, "acquire_key_count", c.acquire_key_count, w);
  c.runtime_images = get(j, "runtime_images", c.runtime_images, w);
  c.bootloader_image = get(j, "bootloader_image", c.bootloader_image, w);
  p.shielding_db = get(j, "shielding_db", p.shielding_db, w);
  p.hw_attenuation_db = get(j, "hw_attenuation_db", p.hw_attenuation_db, w);
  p.target_prx_dbm = get(j, "target_prx_dbm", p.target_prx_dbm, w);
  p.calibration_distance_cm = get(j, "calibration_distance_cm", p.calibration_distance_cm, w);
  p.max_ptx_dbm = get(j, "max_ptx_dbm", p.max_ptx_dbm, w);
  p.gain_db = get(j, "gain_db", p.gain_db, w);
  p.rx_sensitivity_dbm = get(j, "rx_sensitivity_dbm", p.rx_sensitivity_dbm, w);
  p.freq_mhz = get(j, "freq_mhz", p.freq_mhz, w);
  p.channel.bandwidth_hz = get(j, "bandwidth_hz", p.channel.bandwidth_hz, w);
  p.channel.data_rate_bps = get(j, "rate_bps", p.channel.data_rate_bps, w);
  return p;
}

BackendParams parse_backend(const Json& j) {
  const std::string w = "backend";
  check_keys(j, {"keys", "blacklist_timeout_h", "box_token", "templates", "bootloader_size", "credentials",
                 "wired_rate_bps"},
             w);
  BackendParams p;
  p.initial_keys = get(j, "keys", p.initial_keys, w);
  p.config.blacklist_timeout = std::chrono::duration_cast<SimTime>(
      std::chrono::duration<double, std::ratio<3600>>(get(j, "blacklist_timeout_h", 24.0, w)));
  p.config.box_token = get(j, "box_token", p.config.box_token, w);
  p.bootloader_size = get(j, "bootloader_size", p.bootloader_size, w);
  p.wired_rate_bps = get(j, "wired_rate_bps", p.wired_rate_bps, w);
  if (j.contains("credentials")) {
    const auto& c = j["credentials"];
    check_keys(c, {"ssid", "passphrase", "server_address"}, w + ".credentials");
    auto& cr = p.config.credentials;
    cr.ssid = get(c, "ssid", cr.ssid, w + ".credentials");
    cr.passphrase = get(c, "passphrase", cr.passphrase, w + ".credentials");
    cr.server_address = get(c, "server_address", cr.server_address, w + ".credentials");
  }
  if (j.contains("templates")) {
    if (!j["templates"].is_array()) invalid(w + ".templates", "must be an array");
    p.templates.clear();
    for (std::size_t i = 0; i < j["templates"].size(); ++i) {
      const auto& t = j["templates"][i];
      const auto tw = w + ".templates[" + std::to_string(i) + "]";
      check_keys(t, {"name", "size"}, tw);
      TemplateSpec spec;
      spec.name = get<std::string>(t, "name", "", tw);
      spec.size = get(t, "size", spec.size, tw);
      p.templates.push_back(spec);
    }
  }
  return p;
}

const std::set<std::string> kNodeFields{"id",          "distance_cm",     "field_distance_cm", "boot_delay_s",
                                        "placed",      "honesty",         "retained_bytes",    "runtime_image",
                                        "corrupt_key", "rx_sensitivity_dbm", "ptx_dbm",        "gain_db",
                                        "memory_size", "bootloader_region", "max_attempts"};

NodeSpec parse_node(const Json& j, const NodeSpec& base, const std::string& w) {
  check_keys(j, kNodeFields, w);
  NodeSpec n = base;
  n.id = get(j, "id", n.id, w);
  n.distance_cm = get(j, "distance_cm", n.distance_cm, w);
  n.field_distance_cm = get(j, "field_distance_cm", n.field_distance_cm, w);
  n.boot_delay_s = get(j, "boot_delay_s", n.boot_delay_s, w);
  n.placed = get(j, "placed", n.placed, w);
  auto& c = n.config;
  if (j.contains("honesty")) {
    try {
      c.honesty = node::honesty_from_string(get<std::string>(j, "honesty", "", w));
    } catch (const DecodeError& e) {
      invalid(w + ".honesty", e.what());
    }
  }
  c.retained_bytes = get(j, "retained_bytes", c.retained_bytes, w);
  c.runtime_image = get(j, "runtime_image", c.runtime_image, w);
  c.corrupt_key = get(j, "corrupt_key", c.corrupt_key, w);
  c.rx_sensitivity_dbm = get(j, "rx_sensitivity_dbm", c.rx_sensitivity_dbm, w);
  c.ptx_dbm = get(j, "ptx_dbm", c.ptx_dbm, w);
  c.gain_db = get(j, "gain_db", c.gain_db, w);
  c.memory_size = get(j, "memory_size", c.memory_size, w);
  c.bootloader_region = get(j, "bootloader_region", c.bootloader_region, w);
  c.max_attempts = get(j, "max_attempts", c.max_attempts, w);
  return n;
}

AttackerSpec parse_attacker(const Json& j, const std::string& w) {
  check_keys(j, {"name", "kind", "distance_cm", "field_distance_cm", "grx_db", "sensitivity_dbm", "ptx_dbm",
                 "gtx_db", "ssid", "channel", "bssid", "rate_bps", "active"},
             w);
  AttackerSpec a;
  a.name = get<std::string>(j, "name", "", w);
  const auto kind = get<std::string>(j, "kind", "eavesdropper", w);
  if (kind == "eavesdropper") {
    a.kind = AttackerKind::Eavesdropper;
  } else if (kind == "rogue_ap") {
    a.kind = AttackerKind::RogueAp;
    a.grx_db = 10.0;
  } else {
    invalid(w + ".kind", "expected eavesdropper or rogue_ap");
  }
  a.distance_cm = get(j, "distance_cm", a.distance_cm, w);
  a.field_distance_cm = get(j, "field_distance_cm", a.field_distance_cm, w);
  a.grx_db = get(j, "grx_db", a.grx_db, w);
  a.sensitivity_dbm = get(j, "sensitivity_dbm", a.sensitivity_dbm, w);
  a.ptx_dbm = get(j, "ptx_dbm", a.ptx_dbm, w);
  a.gtx_db = get(j, "gtx_db", a.gtx_db, w);
  a.ssid = get(j, "ssid", a.ssid, w);
  a.channel = get(j, "channel", a.channel, w);
  a.rate_bps = get(j, "rate_bps", a.rate_bps, w);
  a.active = get(j, "active", a.active, w);
  if (j.contains("bssid")) {
    try {
      a.bssid = box::MacAddress::parse(get<std::string>(j, "bssid", "", w));
    } catch (const DecodeError& e) {
      invalid(w + ".bssid", e.what());
    }
  }
  return a;
}

}  // namespace

Scenario parse_scenario(const Json& j) {
  check_keys(j, {"name", "description", "seed", "box", "backend", "factory", "node_defaults", "nodes", "attacker",
                 "attackers", "field", "script", "assertions", "duration_s", "scan_interval_s",
                 "monitor_interval_s", "retry_interval_s", "frame_timeout_s"},
             "scenario");
  if (!j.contains("seed")) invalid("scenario", "missing seed");
  Scenario s;
  s.name = get(j, "name", s.name, "scenario");
  s.seed = get<std::uint64_t>(j, "seed", 0, "scenario");
  if (j.contains("box")) s.box = parse_box(j["box"]);
  if (j.contains("backend")) s.backend = parse_backend(j["backend"]);
  s.duration_s = j.contains("duration_s") ? std::optional<double>(get(j, "duration_s", 0.0, "scenario"))
                                          : std::nullopt;
  s.scan_interval_s = get(j, "scan_interval_s", s.scan_interval_s, "scenario");
  s.monitor_interval_s = get(j, "monitor_interval_s", s.monitor_interval_s, "scenario");
  s.retry_interval_s = get(j, "retry_interval_s", s.retry_interval_s, "scenario");
  s.frame_timeout_s = get(j, "frame_timeout_s", s.frame_timeout_s, "scenario");

  // The nodes' factory settings default to whatever the Box is set up for.
  s.factory.ssid = s.box.config.ssid;
  if (j.contains("factory")) {
    const auto& f = j["factory"];
    check_keys(f, {"ssid", "passphrase", "server_address", "paths"}, "factory");
    if (f.contains("paths")) s.factory.paths = parse_paths(f["paths"], s.factory.paths, "factory.paths");
    s.factory.ssid = get(f, "ssid", s.factory.ssid, "factory");
    s.factory.passphrase = get(f, "passphrase", s.factory.passphrase, "factory");
    s.factory.server_address = get(f, "server_address", s.factory.server_address, "factory");
  }

  if (j.contains("field")) {
    const auto& f = j["field"];
    check_keys(f, {"rate_bps", "gateway_gain_db", "gateway_sensitivity_dbm"}, "field");
    s.field.rate_bps = get(f, "rate_bps", s.field.rate_bps, "field");
    s.field.gateway_gain_db = get(f, "gateway_gain_db", s.field.gateway_gain_db, "field");
    s.field.gateway_sensitivity_dbm = get(f, "gateway_sensitivity_dbm", s.field.gateway_sensitivity_dbm, "field");
  }

  NodeSpec base;
  if (j.contains("node_defaults")) base = parse_node(j["node_defaults"], base, "node_defaults");
  if (j.contains("nodes")) {
    if (!j["nodes"].is_array()) invalid("nodes", "must be an array");
    for (std::size_t i = 0; i < j["nodes"].size(); ++i) {
      auto n = parse_node(j["nodes"][i], base, "nodes[" + std::to_string(i) + "]");
      if (n.id.empty()) n.id = "node" + std::to_string(i + 1);
      n.config.mac = node::node_mac(s.seed, i);
      if (n.config.runtime_image.empty() && !s.box.config.runtime_images.empty()) {
        n.config.runtime_image = s.box.config.runtime_images.front();
      }
      s.nodes.push_back(std::move(n));
    }
  }

  if (j.contains("attacker")) s.attackers.push_back(parse_attacker(j["attacker"], "attacker"));
  if (j.contains("attackers")) {
    if (!j["attackers"].is_array()) invalid("attackers", "must be an array");
    for (std::size_t i = 0; i < j["attackers"].size(); ++i) {
      s.attackers.push_back(parse_attacker(j["attackers"][i], "attackers[" + std::to_string(i) + "]"));
    }
  }
  for (std::size_t i = 0; i < s.attackers.size(); ++i) {
    auto& a = s.attackers[i];
    if (a.name.empty()) a.name = (a.kind == AttackerKind::RogueAp ? "rogue" : "eve") + std::to_string(i + 1);
    if (a.ssid.empty()) a.ssid = s.box.config.ssid;
    if (a.channel == 0) a.channel = s.box.config.channel;
  }

  if (j.contains("script")) {
    if (!j["script"].is_array()) invalid("script", "must be an array");
    for (std::size_t i = 0; i < j["script"].size(); ++i) {
      const auto& st = j["script"][i];
      const auto w = "script[" + std::to_string(i) + "]";
      if (!st.is_object()) invalid(w, "must be an object");
      ScriptStep step;
      step.at_s = get(st, "at_s", -1.0, w);
      step.action = get<std::string>(st, "action", "", w);
      step.args = Json::object();
      for (const auto& [k, v] : st.items()) {
        if (k != "at_s" && k != "action") step.args[k] = v;
      }
      s.script.push_back(std::move(step));
    }
  }

  if (j.contains("assertions")) {
    if (!j["assertions"].is_array()) invalid("assertions", "must be an array");
    for (std::size_t i = 0; i < j["assertions"].size(); ++i) {
      const auto& a = j["assertions"][i];
      const auto w = "assertions[" + std::to_string(i) + "]";
      check_keys(a, {"name", "metric", "op", "value"}, w);
      AssertionSpec spec;
      spec.metric = get<std::string>(a, "metric", "", w);
      spec.name = get(a, "name", spec.metric, w);
      spec.op = get(a, "op", spec.op, w);
      if (!a.contains("value")) invalid(w, "missing value");
      spec.value = a["value"];
      s.assertions.push_back(std::move(spec));
    }
  }

  validate_scenario(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidScenario("cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidScenario(path + ": " + e.what());
  }
  return parse_scenario(j);
}

BoxRadio calibrate_box(const BoxParams& p) {
  radio::CalibrationInput in;
  in.target_prx_dbm = p.target_prx_dbm;
  in.worst_case_distance_cm = p.calibration_distance_cm;
  in.freq_mhz = p.freq_mhz;
  in.hw_attenuation_db = p.hw_attenuation_db;
  in.max_ptx_dbm = p.max_ptx_dbm;
  in.gtx_db = p.gain_db;
  BoxRadio r;
  r.radio_ptx_dbm = radio::calibrate_tx(in);
  r.antenna_ptx_dbm = r.radio_ptx_dbm - p.hw_attenuation_db;
  return r;
}

void validate_scenario(const Scenario& s) {
  const auto& b = s.box;
  if (b.shielding_db < 0) invalid("box.shielding_db", "must be non-negative");
  if (b.calibration_distance_cm <= 0) invalid("box.calibration_distance_cm", "must be positive");
  if (b.config.deploy_timeout <= SimTime::zero()) invalid("box.deploy_timeout_s", "must be positive");
  if (b.config.acquire_key_count == 0) invalid("box.acquire_key_count", "must be positive");
  try {
    radio::validate(b.channel);
    calibrate_box(b);
  } catch (const radio::CalibrationError& e) {
    invalid("box", e.what());
  } catch (const std::domain_error& e) {
    invalid("box", e.what());
  }

  std::set<std::string> templates;
  std::size_t largest = s.backend.bootloader_size;
  for (const auto& t : s.backend.templates) {
    if (t.name.empty()) invalid("backend.templates", "template without a name");
    if (!templates.insert(t.name).second) invalid("backend.templates", "duplicate template " + t.name);
    if (t.name == b.config.bootloader_image) invalid("backend.templates", "name clashes with the bootloader");
    largest = std::max(largest, t.size);
  }
  for (const auto& name : b.config.runtime_images) {
    if (!templates.count(name)) invalid("box.runtime_images", "unknown image " + name);
  }
  if (b.config.runtime_images.empty()) invalid("box.runtime_images", "at least one image is required");

  std::set<std::string> ids;
  std::optional<std::size_t> erasable;
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    const auto& n = s.nodes[i];
    const auto w = "nodes[" + std::to_string(i) + "]";
    if (!ids.insert(n.id).second) invalid(w + ".id", "duplicate id " + n.id);
    if (n.distance_cm <= 0 || n.field_distance_cm <= 0) invalid(w, "distances must be positive");
    if (n.boot_delay_s < 0) invalid(w + ".boot_delay_s", "must be non-negative");
    const auto& c = n.config;
    if (c.bootloader_region >= c.memory_size) invalid(w, "bootloader region must be smaller than memory");
    if (c.memory_size < 2 * largest) invalid(w + ".memory_size", "must be at least twice the largest image");
    if (s.backend.bootloader_size + 40 > c.bootloader_region) invalid(w, "bootloader does not fit its region");
    if (!c.runtime_image.empty() && !templates.count(c.runtime_image)) {
      invalid(w + ".runtime_image", "unknown image " + c.runtime_image);
    }
    const auto region = c.memory_size - c.bootloader_region;
    if (erasable && *erasable != region) invalid(w, "all nodes must share one memory layout");
    erasable = region;
  }

  std::set<std::string> attackers;
  for (const auto& a : s.attackers) {
    if (!attackers.insert(a.name).second) invalid("attackers", "duplicate name " + a.name);
    if (a.distance_cm <= 0 || a.field_distance_cm <= 0) invalid("attackers." + a.name, "distances must be positive");
    if (a.rate_bps <= 0) invalid("attackers." + a.name, "rate must be positive");
  }

  double last = 0;
  for (std::size_t i = 0; i < s.script.size(); ++i) {
    const auto& st = s.script[i];
    const auto w = "script[" + std::to_string(i) + "]";
    if (st.at_s < 0) invalid(w + ".at_s", "missing or negative");
    if (st.at_s < last) invalid(w + ".at_s", "script is not in time order");
    last = st.at_s;
    if (!kActions.count(st.action)) invalid(w + ".action", "unknown action '" + st.action + "'");
    if (kNodeActions.count(st.action)) {
      if (!st.args.contains("node") || !st.args["node"].is_string()) invalid(w, "needs a node id");
      if (!ids.count(st.args["node"].get<std::string>())) invalid(w + ".node", "unknown node");
    }
    if (st.action == "attacker_on" || st.action == "attacker_off") {
      if (!st.args.contains("name") || !st.args["name"].is_string()) invalid(w, "needs an attacker name");
      if (!attackers.count(st.args["name"].get<std::string>())) invalid(w + ".name", "unknown attacker");
    }
  }

  for (const auto& a : s.assertions) {
    static const std::set<std::string> ops{"==", "!=", ">=", "<=", ">", "<", "contains", "not_contains"};
    if (a.metric.empty()) invalid("assertions", "assertion without a metric");
    if (!ops.count(a.op)) invalid("assertions." + a.name, "unknown operator " + a.op);
  }
}

}  // namespace faraday::sim
