#pragma once

#include <numbers>

namespace fluxmod {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kEulerGamma = std::numbers::egamma;

// All internal frequencies are angular (rad/s); I/O is in Hz.
constexpr double hz_to_angular(double f_hz) { return kTwoPi * f_hz; }
constexpr double angular_to_hz(double w) { return w / kTwoPi; }

// Flux is carried in units of the flux quantum; the phase is 2*pi*flux.
constexpr double flux_to_phase(double phi) { return kTwoPi * phi; }

}  // namespace fluxmod
