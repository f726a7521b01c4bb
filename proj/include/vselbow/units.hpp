#pragma once
// Shared angle helpers and physical constants.

#include <numbers>

namespace vselbow {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kGravity = 9.81; // m/s^2

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

} // namespace vselbow
