#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>

#include "model_check.hpp"

using namespace faraday;
using namespace faraday::box;
using namespace faraday::box::model;

namespace {

MachineState powered(BoxState s) {
  MachineState m;
  m.powered = true;
  m.state = s;
  return m;
}

MachineState deploying() {
  auto m = powered(BoxState::Deploy_FW);
  m.session_open = true;
  return m;
}

std::vector<UtteranceId> said(const Transition& t) {
  std::vector<UtteranceId> out;
  for (const auto& a : t.actions) {
    if (a.kind == ActionKind::Say) out.push_back(a.utterance->id);
  }
  return out;
}

DeploySession session_with(std::size_t flashed, std::size_t failed = 0) {
  DeploySession s;
  std::uint8_t i = 1;
  for (std::size_t k = 0; k < flashed; ++k) s.served_macs[MacAddress{{2, 0, 0, 0, 0, i++}}].stage = MacStage::RuntimeFlashed;
  for (std::size_t k = 0; k < failed; ++k) s.served_macs[MacAddress{{2, 0, 0, 0, 0, i++}}].stage = MacStage::ErasureFailed;
  return s;
}


}  // namespace

TEST_CASE("power on picks the firmware state by inventory") {
  const MachineState off;
  auto t = step(off, BoxEvent::simple(EventKind::PowerOn), inventory(2), {});
  CHECK(t.next.state == BoxState::BoxOpen_FW);
  CHECK(t.next.powered);
  t = step(off, BoxEvent::simple(EventKind::PowerOn), inventory(1), {});
  CHECK(t.next.state == BoxState::BoxOpen_NoFW);  // threshold compares strictly
  t = step(off, BoxEvent::simple(EventKind::PowerOn), inventory(5, false), {});
  CHECK(t.next.state == BoxState::BoxOpen_NoFW);
  t = step(off, BoxEvent::simple(EventKind::LidClosed), inventory(5), {});
  CHECK_FALSE(t.handled);
  CHECK(t.next == off);
}

TEST_CASE("acquire flow") {
  auto m = powered(BoxState::BoxOpen_NoFW);
  auto inv = inventory(0, false);
  auto t = step(m, BoxEvent::simple(EventKind::PressAcquire), inv, {});
  CHECK(t.next.acquire_pending);
  CHECK(has_action(t, ActionKind::StartAcquire));
  CHECK_FALSE(step(t.next, BoxEvent::simple(EventKind::PressAcquire), inv, {}).handled);

  inv.staged = Acquisition{{dummy_template()}, {dummy_key(1), dummy_key(2), dummy_key(3)}};
  auto done = step(t.next, BoxEvent::simple(EventKind::AcquireCompleted), inv, {});
  CHECK(done.next.state == BoxState::BoxOpen_FW);
  CHECK_FALSE(done.next.acquire_pending);
  CHECK(has_action(done, ActionKind::CommitAcquired));
  CHECK(said(done) == std::vector{UtteranceId::AcquireDone});

  auto failed = step(t.next, BoxEvent::acquire_failed("the backend is unreachable"), inv, {});
  CHECK(failed.next.state == BoxState::BoxOpen_NoFW);
  CHECK(has_action(failed, ActionKind::DiscardAcquired));
  CHECK(said(failed) == std::vector{UtteranceId::AcquireFailed});

  inv.staged = Acquisition{{dummy_template()}, {dummy_key(1)}};
  auto few = step(t.next, BoxEvent::simple(EventKind::AcquireCompleted), inv, {});
  CHECK(few.next.state == BoxState::BoxOpen_NoFW);
  CHECK(said(few) == std::vector{UtteranceId::AcquireInsufficient});

  CHECK_FALSE(step(m, BoxEvent::simple(EventKind::AcquireCompleted), inv, {}).handled);
}

TEST_CASE("closing without arming keeps the box portable") {
  auto t = step(powered(BoxState::BoxOpen_FW), BoxEvent::simple(EventKind::LidClosed), inventory(5), {});
  CHECK(t.next.state == BoxState::BoxClosed_FW);
  CHECK_FALSE(has_action(t, ActionKind::StartNetwork));
  CHECK(said(t) == std::vector{UtteranceId::ClosedPortable});
  t = step(powered(BoxState::BoxOpen_NoFW), BoxEvent::simple(EventKind::LidClosed), inventory(0), {});
  CHECK(t.next.state == BoxState::BoxClosed_NoFW);
  CHECK(step(powered(BoxState::BoxClosed_FW), BoxEvent::simple(EventKind::LidOpened), inventory(5), {}).next.state ==
        BoxState::BoxOpen_FW);
  CHECK(step(powered(BoxState::BoxClosed_NoFW), BoxEvent::simple(EventKind::LidOpened), inventory(0), {}).next.state ==
        BoxState::BoxOpen_NoFW);
}

TEST_CASE("deploy needs firmware, arming and a closed lid") {
  auto t = step(powered(BoxState::BoxOpen_NoFW), BoxEvent::simple(EventKind::PressDeploy), inventory(0), {});
  CHECK_FALSE(t.next.deploy_armed);
  CHECK(said(t) == std::vector{UtteranceId::NoFirmware});

  t = step(powered(BoxState::BoxOpen_FW), BoxEvent::simple(EventKind::PressDeploy), inventory(5), {});
  CHECK(t.next.deploy_armed);
  CHECK(t.next.state == BoxState::BoxOpen_FW);
  auto closed = step(t.next, BoxEvent::simple(EventKind::LidClosed), inventory(5), {});
  CHECK(closed.next.state == BoxState::Deploy_FW);
  CHECK(closed.next.serving());
  CHECK(has_action(closed, ActionKind::StartSession));
  CHECK(has_action(closed, ActionKind::StartNetwork));
  CHECK(has_action(closed, ActionKind::RestartDeployTimer));
  CHECK(said(closed) == std::vector{UtteranceId::DeployStarted});

  // Buttons are inside the box.
  CHECK_FALSE(step(powered(BoxState::BoxClosed_FW), BoxEvent::simple(EventKind::PressDeploy), inventory(5), {}).handled);
}

TEST_CASE("deploy session events") {
  const auto m = deploying();
  auto t = step(m, BoxEvent::ota(kMac, OtaStage::Bootloader), inventory(5), {});
  CHECK(t.next == m);
  CHECK(has_action(t, ActionKind::ServeOta));
  CHECK(has_action(t, ActionKind::RestartDeployTimer));
  t = step(m, BoxEvent::erasure(kMac, true), inventory(5), {});
  CHECK(has_action(t, ActionKind::RecordErasure));

  auto empty = step(m, BoxEvent::simple(EventKind::DeployTimeout), inventory(5), {});
  CHECK(empty.next.state == BoxState::BoxClosed_FW);
  CHECK_FALSE(empty.next.serving());
  CHECK(has_action(empty, ActionKind::StopNetwork));
  CHECK(said(empty) == std::vector{UtteranceId::NoNodesFound});

  auto done = step(m, BoxEvent::simple(EventKind::DeployTimeout), inventory(5), session_with(4));
  CHECK(done.next.state == BoxState::Deploy_FW);
  CHECK(done.next.announced);
  CHECK_FALSE(done.next.serving());
  CHECK(said(done) == std::vector{UtteranceId::Provisioned});

  auto open_fw = step(done.next, BoxEvent::simple(EventKind::LidOpened), inventory(5), session_with(4));
  CHECK(open_fw.next.state == BoxState::BoxOpen_FW);
  auto open_nofw = step(done.next, BoxEvent::simple(EventKind::LidOpened), inventory(1), session_with(4));
  CHECK(open_nofw.next.state == BoxState::BoxOpen_NoFW);
  CHECK_FALSE(step(done.next, BoxEvent::ota(kMac, OtaStage::Bootloader), inventory(5), {}).handled);
}

TEST_CASE("panic abort") {
  auto t = step(deploying(), BoxEvent::simple(EventKind::LidOpened), inventory(7), session_with(2));
  CHECK(t.next.state == BoxState::BoxOpen_NoFW);
  CHECK_FALSE(t.next.serving());
  CHECK_FALSE(t.next.deploy_armed);
  CHECK(has_action(t, ActionKind::EraseKeys));
  CHECK(has_action(t, ActionKind::StopNetwork));
  CHECK(said(t) == std::vector{UtteranceId::PanicAbort});
  CHECK(t.actions.back().utterance->text.find("All 7 remaining keys") != std::string::npos);
}

TEST_CASE("rogue warning in every powered state") {
  for (auto s : {BoxState::BoxOpen_NoFW, BoxState::BoxOpen_FW, BoxState::BoxClosed_NoFW, BoxState::BoxClosed_FW,
                 BoxState::Deploy_FW}) {
    auto t = step(powered(s), BoxEvent::rogue("faraday-ota", 6), inventory(3), {});
    CHECK(t.handled);
    CHECK(t.next == powered(s));
    CHECK(said(t) == std::vector{UtteranceId::RogueWarning});
  }
  CHECK_FALSE(step(MachineState{}, BoxEvent::rogue("faraday-ota", 6), inventory(3), {}).handled);
}

TEST_CASE("golden utterances") {
  CHECK(announce(session_with(4)).text == "4 sensor nodes provisioned. Please open the box and remove them.");
  CHECK(announce(session_with(1)).text == "1 sensor node provisioned. Please open the box and remove them.");
  CHECK(announce(session_with(3, 1)).text ==
        "3 sensor nodes provisioned. Please open the box and remove them. "
        "1 sensor node failed secure erasure and was not provisioned.");
  CHECK(announce({}).text == "No sensor nodes found. Please open the box and check the sensor nodes.");
  CHECK(announce({}).id == UtteranceId::NoNodesFound);
  CHECK(say::rogue_warning("faraday-ota", 6).text ==
        "Warning: a foreign network named faraday-ota on channel 6 was detected. "
        "Power off the sensor nodes and consider them compromised.");
  CHECK(say::out_of_keys().text == "Out of keys. Remaining sensor nodes cannot be provisioned.");
}

TEST_CASE("event json round trip") {
  for (const auto& e : {BoxEvent::simple(EventKind::PowerOn), BoxEvent::ota(kMac, OtaStage::Runtime, "img"),
                        BoxEvent::erasure(kMac, true), BoxEvent::rogue("x", 11), BoxEvent::acquire_failed("c")}) {
    const auto back = BoxEvent::from_json(e.to_json());
    CHECK(back.to_json() == e.to_json());
    CHECK(back.kind == e.kind);
  }
  CHECK(BoxEvent::from_json(R"({"kind":"LidClosed"})").kind == EventKind::LidClosed);
  CHECK_THROWS_AS(BoxEvent::from_json(R"({"kind":"Explode"})"), DecodeError);
  CHECK_THROWS_AS(BoxEvent::from_json("not json"), DecodeError);
  CHECK(MacAddress::parse("02:a1:00:ff:10:01").str() == "02:a1:00:ff:10:01");
  CHECK_THROWS_AS(MacAddress::parse("02:a1:00"), DecodeError);
}
TEST_CASE("model check to depth 12") {
  const auto started = std::chrono::steady_clock::now();
  std::size_t total_serving = 0;
  for (const auto& [start, threshold] : start_worlds()) {
    const auto stats = model_check(start, threshold, 12);
    MESSAGE("states " << stats.states << ", transitions " << stats.transitions);
    CHECK(stats.violations == 0);
    CHECK(stats.first_violation == "");
    CHECK(stats.states > 50);
    total_serving += stats.serving_states;
  }
  CHECK(total_serving > 0);  // the search does reach deployment
  CHECK(std::chrono::steady_clock::now() - started < std::chrono::seconds(10));
}
