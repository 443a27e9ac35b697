#pragma once

#include <stdexcept>
#include <string>

// Link-budget arithmetic for a shielded enclosure. Units follow the usual
// RF convention: powers in dBm, gains and losses in dB, distance in
// centimeters, frequency in megahertz.
namespace faraday::radio {

inline constexpr double kBoltzmann = 1.380649e-23;  // J/K
inline constexpr double kRoomTemperatureK = 290.0;
inline constexpr double kFsplConstantDb = 67.55;     // cm / MHz variant

struct LinkBudget {
  double ptx_dbm = 0.0;
  double gtx_db = 0.0;
  double grx_db = 0.0;
  double lbox_db = 0.0;  // 0 when both endpoints are inside the enclosure
  double distance_cm = 1.0;
  double freq_mhz = 2400.0;
};

struct ChannelParams {
  double bandwidth_hz = 20e6;
  double data_rate_bps = 150e6;
  double temperature_k = kRoomTemperatureK;
};

struct ReceptionVerdict {
  double prx_dbm = 0.0;
  double noise_floor_dbm = 0.0;
  double snr_db = 0.0;
  double required_snr_db = 0.0;
  bool above_sensitivity = false;
  bool above_capacity_threshold = false;
  bool decodable = false;
};

class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& what, double required_ptx_dbm)
      : std::runtime_error(what), required_ptx_dbm_(required_ptx_dbm) {}
  double required_ptx_dbm() const noexcept { return required_ptx_dbm_; }

 private:
  double required_ptx_dbm_;
};

/// Free-space path loss: 20 log10(d) + 20 log10(f) - 67.55.
/// Throws std::domain_error unless both arguments are positive.
double fspl_db(double distance_cm, double freq_mhz);

/// Ptx + Gtx - Lfspl + Grx - Lbox. Validates the budget first.
double received_power_dbm(const LinkBudget& budget);

/// Thermal noise kTB expressed in dBm.
double noise_floor_dbm(const ChannelParams& params);

/// Minimum SNR at which Shannon capacity reaches the data rate:
/// 10 log10(2^(C/B) - 1).
double required_snr_db(const ChannelParams& params);

ReceptionVerdict reception_verdict(const LinkBudget& budget,
                                   const ChannelParams& params,
                                   double rx_sensitivity_dbm);

struct CalibrationInput {
  double target_prx_dbm = -89.0;
  double worst_case_distance_cm = 30.0;
  double freq_mhz = 2400.0;
  double hw_attenuation_db = 80.0;  // four chained 20 dB attenuators
  double max_ptx_dbm = 20.0;        // radio maximum
  double gtx_db = 0.0;
  double grx_db = 0.0;
};

/// Software transmit power that puts target_prx_dbm at the farthest node
/// after the hardware attenuator chain and in-enclosure path loss.
/// Throws CalibrationError if the result exceeds the radio maximum.
double calibrate_tx(const CalibrationInput& in);

/// Inbound link budget: power reaching a node inside the closed enclosure
/// from an external transmitter.
double rogue_power_inside_dbm(double attacker_ptx_dbm, double attacker_gtx_db,
                              double distance_cm, double freq_mhz, double lbox_db);

void validate(const LinkBudget& budget);
void validate(const ChannelParams& params);

}  // namespace faraday::radio
