#pragma once

// Physical constants, CODATA 2018.

namespace fms::constants {

inline constexpr double hbar = 1.054571817e-34;               // J s
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double amu = 1.66053906660e-27;              // kg

// Default ion species: 40Ca (atomic mass; the missing electron is ~1e-5
// relative and far below every tolerance used here).
inline constexpr double ca40_mass_amu = 39.9625909;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

}  // namespace fms::constants
