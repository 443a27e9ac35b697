#include "faraday/radio.hpp"

#include <cmath>
#include <sstream>

namespace faraday::radio {

void validate(const LinkBudget& b) {
  if (!(b.distance_cm > 0.0)) throw std::domain_error("distance_cm must be > 0");
  if (!(b.freq_mhz > 0.0)) throw std::domain_error("freq_mhz must be > 0");
  if (!(b.lbox_db >= 0.0)) throw std::domain_error("lbox_db must be >= 0");
}

void validate(const ChannelParams& p) {
  if (!(p.bandwidth_hz > 0.0)) throw std::domain_error("bandwidth_hz must be > 0");
  if (!(p.data_rate_bps > 0.0)) throw std::domain_error("data_rate_bps must be > 0");
  if (!(p.temperature_k > 0.0)) throw std::domain_error("temperature_k must be > 0");
}

double fspl_db(double distance_cm, double freq_mhz) {
  if (!(distance_cm > 0.0) || !(freq_mhz > 0.0)) {
    throw std::domain_error("fspl_db: distance and frequency must be positive");
  }
  return 20.0 * std::log10(distance_cm) + 20.0 * std::log10(freq_mhz) - kFsplConstantDb;
}

double received_power_dbm(const LinkBudget& b) {
  validate(b);
  return b.ptx_dbm + b.gtx_db - fspl_db(b.distance_cm, b.freq_mhz) + b.grx_db - b.lbox_db;
}

double noise_floor_dbm(const ChannelParams& p) {
  if (!(p.bandwidth_hz > 0.0)) throw std::domain_error("bandwidth_hz must be > 0");
  if (!(p.temperature_k > 0.0)) throw std::domain_error("temperature_k must be > 0");
  const double watts = kBoltzmann * p.temperature_k * p.bandwidth_hz;
  return 10.0 * std::log10(watts / 1e-3);
}

double required_snr_db(const ChannelParams& p) {
  validate(p);
  // expm1 keeps precision when C/B is tiny.
  const double linear = std::expm1(std::log(2.0) * (p.data_rate_bps / p.bandwidth_hz));
  return 10.0 * std::log10(linear);
}

ReceptionVerdict reception_verdict(const LinkBudget& budget, const ChannelParams& params,
                                   double rx_sensitivity_dbm) {
  ReceptionVerdict v;
  v.prx_dbm = received_power_dbm(budget);
  v.noise_floor_dbm = noise_floor_dbm(params);
  v.snr_db = v.prx_dbm - v.noise_floor_dbm;
  v.required_snr_db = required_snr_db(params);
  v.above_sensitivity = v.prx_dbm >= rx_sensitivity_dbm;
  v.above_capacity_threshold = v.snr_db >= v.required_snr_db;
  v.decodable = v.above_sensitivity && v.above_capacity_threshold;
  return v;
}

double calibrate_tx(const CalibrationInput& in) {
  if (!std::isfinite(in.target_prx_dbm)) throw std::domain_error("target_prx_dbm must be finite");
  if (in.hw_attenuation_db < 0.0) throw std::domain_error("hw_attenuation_db must be >= 0");
  const double ptx = in.target_prx_dbm + in.hw_attenuation_db +
                     fspl_db(in.worst_case_distance_cm, in.freq_mhz) - in.gtx_db - in.grx_db;
  if (ptx > in.max_ptx_dbm) {
    std::ostringstream msg;
    msg << "calibration infeasible: need " << ptx << " dBm, radio maximum is "
        << in.max_ptx_dbm << " dBm";
    throw CalibrationError(msg.str(), ptx);
  }
  return ptx;
}

double rogue_power_inside_dbm(double attacker_ptx_dbm, double attacker_gtx_db,
                              double distance_cm, double freq_mhz, double lbox_db) {
  return received_power_dbm(LinkBudget{attacker_ptx_dbm, attacker_gtx_db, 0.0, lbox_db,
                                       distance_cm, freq_mhz});
}

}  // namespace faraday::radio
