#include <string>

#include "faraday/box.hpp"

namespace faraday::box {

std::string_view to_string(UtteranceId id) {
  switch (id) {
    case UtteranceId::ReadyNoFirmware: return "ready_no_firmware";
    case UtteranceId::ReadyFirmware: return "ready_firmware";
    case UtteranceId::Acquiring: return "acquiring";
    case UtteranceId::AcquireDone: return "acquire_done";
    case UtteranceId::AcquireInsufficient: return "acquire_insufficient";
    case UtteranceId::AcquireFailed: return "acquire_failed";
    case UtteranceId::DeployArmed: return "deploy_armed";
    case UtteranceId::NoFirmware: return "no_firmware";
    case UtteranceId::ClosedPortable: return "closed_portable";
    case UtteranceId::DeployStarted: return "deploy_started";
    case UtteranceId::NoNodesFound: return "no_nodes_found";
    case UtteranceId::Provisioned: return "provisioned";
    case UtteranceId::OutOfKeys: return "out_of_keys";
    case UtteranceId::PanicAbort: return "panic_abort";
    case UtteranceId::RogueWarning: return "rogue_warning";
  }
  return "?";
}

namespace {
std::string nodes(std::size_t n) { return std::to_string(n) + (n == 1 ? " sensor node" : " sensor nodes"); }
}  // namespace

namespace say {

Utterance ready(bool stocked) {
  if (stocked) {
    return {UtteranceId::ReadyFirmware,
            "Firmware and keys are available. Place the sensor nodes inside, press the deploy button and close the "
            "box."};
  }
  return {UtteranceId::ReadyNoFirmware,
          "No firmware or keys available. Connect the box to the backend and press the acquire button."};
}

Utterance acquiring() { return {UtteranceId::Acquiring, "Acquiring firmware and keys from the backend."}; }

Utterance acquire_done(std::size_t keys) {
  return {UtteranceId::AcquireDone,
          "Firmware and " + std::to_string(keys) + " keys acquired. You can now unplug the box."};
}

Utterance acquire_insufficient(std::size_t keys, std::size_t threshold) {
  return {UtteranceId::AcquireInsufficient, "Only " + std::to_string(keys) +
                                                " keys available, more than " + std::to_string(threshold) +
                                                " are required. Press the acquire button again."};
}

Utterance acquire_failed(std::string_view cause) {
  return {UtteranceId::AcquireFailed, "Acquiring firmware and keys failed: " + std::string(cause) + "."};
}

Utterance deploy_armed() { return {UtteranceId::DeployArmed, "Deployment armed. Close the box to start."}; }

Utterance no_firmware() {
  return {UtteranceId::NoFirmware, "No firmware available. Connect the box to the backend and press the acquire "
                                   "button first."};
}

Utterance closed_portable() {
  return {UtteranceId::ClosedPortable, "Box closed. It can now be carried to the deployment site."};
}

Utterance deploy_started() {
  return {UtteranceId::DeployStarted, "Deployment started. Please keep the box closed."};
}

Utterance out_of_keys() {
  return {UtteranceId::OutOfKeys, "Out of keys. Remaining sensor nodes cannot be provisioned."};
}

Utterance panic_abort(std::size_t erased) {
  return {UtteranceId::PanicAbort, "Warning: the box was opened during deployment. All " + std::to_string(erased) +
                                       " remaining keys have been erased. Sensor nodes that were not announced "
                                       "are not provisioned."};
}

Utterance rogue_warning(std::string_view ssid, int channel) {
  return {UtteranceId::RogueWarning, "Warning: a foreign network named " + std::string(ssid) + " on channel " +
                                         std::to_string(channel) +
                                         " was detected. Power off the sensor nodes and consider them compromised."};
}

}  // namespace say

Utterance announce(const DeploySession& session) {
  const auto flashed = session.runtime_flashed();
  const auto failed = session.erasure_failed();
  if (session.served_macs.empty()) {
    return {UtteranceId::NoNodesFound, "No sensor nodes found. Please open the box and check the sensor nodes."};
  }
  std::string text = nodes(flashed) + " provisioned. Please open the box and remove them.";
  if (failed > 0) text += " " + nodes(failed) + " failed secure erasure and " + (failed == 1 ? "was" : "were") +
                          " not provisioned.";
  return {UtteranceId::Provisioned, text};
}

}  // namespace faraday::box
