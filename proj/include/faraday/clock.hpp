#pragma once

#include <chrono>
#include <cstdint>

namespace faraday {

/// Simulation and service timestamps: integer microseconds since the
/// scenario (or service) epoch.
using SimTime = std::chrono::microseconds;

constexpr SimTime seconds(double s) {
  return SimTime(static_cast<std::int64_t>(s * 1e6 + (s >= 0 ? 0.5 : -0.5)));
}

constexpr double to_seconds(SimTime t) { return static_cast<double>(t.count()) / 1e6; }

}  // namespace faraday
