#pragma once

// Physical constants (SI, CODATA 2018) and the unit conventions used
// throughout: all frequencies are angular (rad/s) internally; config files
// speak ordinary MHz and are converted in exactly one place (config.hpp).

namespace iontrap::constants {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double hbar = 1.054571817e-34;        // J s
inline constexpr double k_boltzmann = 1.380649e-23;    // J/K
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double epsilon0 = 8.8541878128e-12;   // F/m
inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg

// e^2 / (4 pi eps0), the Coulomb pair-energy prefactor in J m
inline constexpr double coulomb_prefactor =
    elementary_charge * elementary_charge / (4.0 * pi * epsilon0);

// Reference units used in the figures: bath heating intensity and friction
inline constexpr double mu0 = 1e-21;    // N^2 s / kg
inline constexpr double beta0 = 1e-21;  // N s / m

inline constexpr double mhz_to_angular = 2.0 * pi * 1e6;  // rad/s per MHz

}  // namespace iontrap::constants
