#include "faraday/sim.hpp"

namespace faraday::sim {

std::string_view to_string(LinkKind k) {
  switch (k) {
    case LinkKind::BoxDownlink: return "box_downlink";
    case LinkKind::NodeUplink: return "node_uplink";
    case LinkKind::RogueDownlink: return "rogue_downlink";
    case LinkKind::Field: return "field";
  }
  return "?";
}

EavesdropEntry tap_channel(const Frame& frame, const Listener& listener) {
  radio::LinkBudget budget;
  budget.ptx_dbm = frame.ptx_dbm;
  budget.gtx_db = frame.gtx_db;
  budget.grx_db = listener.grx_db;
  budget.lbox_db = frame.lbox_db;
  budget.distance_cm = frame.distance_to_listener_cm;
  budget.freq_mhz = listener.freq_mhz;
  const auto v = radio::reception_verdict(budget, frame.channel, listener.sensitivity_dbm);

  EavesdropEntry e;
  e.at = frame.at;
  e.link = frame.link;
  e.prx_dbm = v.prx_dbm;
  e.snr_db = v.snr_db;
  e.decodable = v.decodable;
  e.size = frame.bytes.size();
  if (v.decodable) e.bytes = frame.bytes;
  return e;
}

EavesdropSummary EavesdropLog::summarize(const std::vector<crypto::SecretKey>& keys) const {
  EavesdropSummary s;
  for (const auto& e : entries_) {
    ++s.frames;
    if (e.link == LinkKind::BoxDownlink) s.best_in_box_prx_dbm = std::max(s.best_in_box_prx_dbm, e.prx_dbm);
    if (!e.decodable) continue;
    ++s.decodable_frames;
    switch (e.link) {
      case LinkKind::BoxDownlink: s.decoded_in_box_bytes += e.bytes.size(); break;
      case LinkKind::NodeUplink: s.decoded_uplink_bytes += e.bytes.size(); break;
      case LinkKind::Field: s.decoded_field_bytes += e.bytes.size(); break;
      case LinkKind::RogueDownlink: break;
    }
    for (const auto& k : keys) s.key_pattern_matches += find_all(e.bytes, k.view()).size();
  }
  return s;
}

}  // namespace faraday::sim
