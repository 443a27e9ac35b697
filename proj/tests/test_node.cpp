#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "faraday/backend.hpp"
#include "faraday/node.hpp"

using namespace faraday;
using namespace faraday::node;

namespace {

struct Rig {
  crypto::SeededRandom rng;
  backend::Backend be;
  net::Router backend_router;
  std::unique_ptr<box::BoxController> box;
  SimTime now{};

  explicit Rig(std::uint64_t seed = 202) : rng(seed, "node-test") {
    be.create_keys(20, rng);
    be.build_and_register_template("sensor-runtime", 16 * 1024);
    be.register_image(backend::build_bootloader_base("ota-bootloader", 4 * 1024));
    backend_router = be.router([this] { return now; });
    box::BoxConfig cfg;
    cfg.acquire_key_count = 5;
    box = std::make_unique<box::BoxController>(cfg, box::Hsm::generate(rng), rng);
    const auto press = [&](box::EventKind k) { box->deliver(box::BoxEvent::simple(k), now); };
    press(box::EventKind::PowerOn);
    press(box::EventKind::PressAcquire);
    box->deliver(box->acquire(backend_router.as_transport()), now);
    press(box::EventKind::PressDeploy);
    press(box::EventKind::LidClosed);
    REQUIRE(box->machine().serving());
  }

  SensorNode make(std::uint8_t index, Honesty h = Honesty::Honest) {
    NodeConfig cfg;
    cfg.mac = node_mac(9, index);
    cfg.honesty = h;
    return SensorNode(cfg, {}, 9);
  }

  // Drives the node against the Box until it stops asking.
  Progress run(SensorNode& n) {
    n.join("box");
    Progress last = Progress::Advanced;
    for (int i = 0; i < 32; ++i) {
      auto req = n.next_request();
      if (!req) break;
      req->peer = n.mac().str();
      last = n.on_response(box->handle_ota(*req, now));
      if (last == Progress::Done || last == Progress::GaveUp) break;
    }
    return last;
  }
};

}  // namespace

TEST_CASE("node mac addresses") {
  std::set<box::MacAddress> seen;
  for (std::size_t i = 0; i < 50; ++i) {
    const auto m = node_mac(3, i);
    CHECK((m.octets[0] & 0x03) == 0x02);
    CHECK(m.octets[5] == i);
    CHECK(m == node_mac(3, i));
    seen.insert(m);
  }
  CHECK(seen.size() == 50);
  CHECK_FALSE(node_mac(3, 1) == node_mac(4, 1));
}

TEST_CASE("scan picks the strongest usable network") {
  const std::vector<VisibleNetwork> visible{
      {"box", "faraday-ota", -60}, {"rogue", "faraday-ota", -50}, {"cafe", "other", -20}, {"weak", "faraday-ota", -95}};
  CHECK(scan_and_join(visible, "faraday-ota", -90) == "rogue");
  CHECK(scan_and_join({visible[0], visible[2], visible[3]}, "faraday-ota", -90) == "box");
  CHECK_FALSE(scan_and_join({visible[2], visible[3]}, "faraday-ota", -90));
  CHECK(scan_and_join({{"edge", "faraday-ota", -90}}, "faraday-ota", -90) == "edge");
  CHECK_FALSE(scan_and_join({}, "faraday-ota", -90));
}

TEST_CASE("honest node provisions and reports") {
  Rig rig;
  auto n = rig.make(1);
  CHECK(n.phase() == Phase::Scanning);
  CHECK_FALSE(n.next_request());
  const Bytes boot_before(n.bootloader_region().begin(), n.bootloader_region().end());

  CHECK(rig.run(n) == Progress::Done);
  CHECK(n.mode() == Mode::Runtime);
  CHECK(n.phase() == Phase::Provisioned);
  REQUIRE(n.installed_pubkey());
  CHECK(*n.installed_pubkey() == rig.box->verifying_key());
  CHECK_FALSE(contains(n.memory(), to_bytes("PREVIOUS-FIRMWARE")));
  CHECK_FALSE(contains(n.memory(), to_bytes("FACTORY-OTA-BOOTLOADER")));
  CHECK(n.runtime_image_name().empty());
  REQUIRE(n.backend_network());
  CHECK(n.backend_network()->server_address == rig.be.ap_credentials().server_address);

  REQUIRE(n.identity());
  const auto rec = rig.be.find(*n.identity());
  REQUIRE(rec);
  CHECK(rec->key == *n.key());
  CHECK(n.boot_counter() == 2);

  std::set<std::array<std::uint8_t, crypto::kNonceSize>> nonces;
  for (int i = 0; i < 5; ++i) {
    const auto req = n.make_reading(to_bytes("t=" + std::to_string(i)));
    const auto sealed = crypto::SealedMessage::parse(req.body);
    CHECK(sealed.identity == *n.identity());
    nonces.insert(sealed.nonce);
    CHECK(crypto::open(sealed, *n.key()) == to_bytes("t=" + std::to_string(i)));
    CHECK(rig.be.ingest_reading(sealed, rig.now).payload == to_bytes("t=" + std::to_string(i)));
  }
  n.reboot();
  CHECK(n.boot_counter() == 3);
  CHECK(n.msg_counter() == 0);
  const auto after = crypto::SealedMessage::parse(n.make_reading(to_bytes("x")).body);
  CHECK(crypto::Nonce::from_bytes(after.nonce) == crypto::Nonce{3, 0});
  nonces.insert(after.nonce);
  CHECK(nonces.size() == 6);
  CHECK(rig.be.find(*n.identity())->state == backend::KeyState::InUse);
}

TEST_CASE("named runtime image") {
  Rig rig;
  NodeConfig cfg;
  cfg.mac = node_mac(9, 8);
  cfg.runtime_image = "sensor-runtime";
  SensorNode n(cfg, {}, 9);
  CHECK(rig.run(n) == Progress::Done);
  CHECK(n.runtime_image_name() == "sensor-runtime");
  cfg.mac = node_mac(9, 9);
  cfg.runtime_image = "missing";
  SensorNode m(cfg, {}, 9);
  CHECK(rig.run(m) == Progress::GaveUp);
  CHECK(rig.box->counts().spent == 1);
}

TEST_CASE("node outside runtime cannot report") {
  NodeConfig cfg;
  cfg.mac = node_mac(1, 1);
  SensorNode n(cfg, {}, 1);
  CHECK_THROWS_AS(n.make_reading(to_bytes("x")), std::logic_error);
  cfg.bootloader_region = cfg.memory_size;
  CHECK_THROWS_AS(SensorNode(cfg, {}, 1), std::invalid_argument);
}

TEST_CASE("data-retaining node is refused a key") {
  Rig rig;
  auto n = rig.make(2, Honesty::RetainsData);
  CHECK(rig.run(n) == Progress::GaveUp);
  CHECK(n.phase() == Phase::Failed);
  CHECK(n.erasure_rejected());
  CHECK_FALSE(n.key());
  CHECK(rig.box->counts().spent == 0);
  // The retained bytes still hold the previous firmware.
  CHECK(contains(n.memory(), to_bytes("PREVIOUS-FIRMWARE")));
}

TEST_CASE("silent node never asks") {
  Rig rig;
  auto n = rig.make(3, Honesty::Silent);
  n.join("box");
  CHECK(n.phase() == Phase::Silent);
  CHECK_FALSE(n.next_request());
}

TEST_CASE("corrupted key does not match the backend") {
  Rig rig;
  NodeConfig cfg;
  cfg.mac = node_mac(9, 4);
  cfg.corrupt_key = true;
  SensorNode n(cfg, {}, 9);
  CHECK(rig.run(n) == Progress::Done);
  CHECK_FALSE(rig.be.find(*n.identity()));
  const auto sealed = crypto::SealedMessage::parse(n.make_reading(to_bytes("x")).body);
  CHECK_THROWS_AS(rig.be.ingest_reading(sealed, rig.now), backend::UnknownIdentity);
}

TEST_CASE("images signed by another box are refused") {
  Rig rig;
  Rig other(203);
  auto n = rig.make(5);
  n.join("box");
  auto req = *n.next_request();
  req.peer = n.mac().str();
  CHECK(n.on_response(rig.box->handle_ota(req, rig.now)) == Progress::Advanced);
  // Walk the real box to the runtime stage, then offer a foreign runtime.
  for (int i = 0; i < 2; ++i) {
    req = *n.next_request();
    req.peer = n.mac().str();
    n.on_response(rig.box->handle_ota(req, rig.now));
  }
  REQUIRE(n.phase() == Phase::FetchRuntime);
  auto foreign = other.make(6);
  REQUIRE(other.run(foreign) == Progress::Done);
  auto ch = other.box->handle_ota([&] {
    auto r = net::make_request("GET", "/ota/runtime");
    r.peer = foreign.mac().str();
    return r;
  }(), other.now);
  REQUIRE(ch.status == 200);
  CHECK(n.on_response(ch) == Progress::RetryLater);
  CHECK(n.rejected_images() == 1);
  CHECK(n.mode() == Mode::Bootloader);

  auto garbage = ch;
  garbage.body.resize(10);
  CHECK(n.on_response(garbage) == Progress::RetryLater);
  CHECK(n.rejected_images() == 2);
}

TEST_CASE("timeouts retry then give up") {
  NodeConfig cfg;
  cfg.mac = node_mac(1, 7);
  cfg.max_attempts = 3;
  SensorNode n(cfg, {}, 1);
  n.join("box");
  CHECK(n.on_timeout() == Progress::RetryLater);
  CHECK(n.on_response(net::Response{503, "", {}}) == Progress::RetryLater);
  CHECK(n.on_timeout() == Progress::GaveUp);
  CHECK(n.phase() == Phase::Failed);
  n.enter_bootloader_mode();
  CHECK(n.phase() == Phase::Scanning);
  CHECK_FALSE(n.network());
}
