#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace iontrap {

// 40Ca+ level scheme used here: |4S1/2> ground, |4P1/2> excited (397 nm
// cooling transition, lifetime 7.1 ns), |3D3/2> metastable reached by the
// 6% spontaneous-emission leak and emptied by the 866 nm repump.
struct IonSpecies {
  double mass;           // kg
  double charge;         // C
  double gamma1;         // excited-state angular decay rate, rad/s
  double k1;             // 397 nm cooling-laser wavenumber, 1/m
  double k2;             // 866 nm repump-laser wavenumber, 1/m
  double leak_fraction;  // branching P -> D, dimensionless
};

struct TrapParams {
  double omega_z;  // axial angular frequency, rad/s
  double alpha;    // omega_x / omega_z
  double gamma_y;  // omega_y / omega_z

  double omega_x() const { return alpha * omega_z; }
  double omega_y() const { return gamma_y * omega_z; }
};

// All members are angular frequencies (rad/s) or radians.
struct LaserParams {
  double omega_rabi;         // 397 nm Rabi frequency
  double omega_rabi_repump;  // 866 nm Rabi frequency
  double delta_397;          // cooling detuning
  double delta_866;          // repump detuning
  double theta;              // 397 beam angle to z, in the xz plane
  double phi_y;              // 866 beam tilt out of the xz plane
};

struct BathParams {
  double e_e;  // bath heating intensity, N^2 s / kg
  double mu0;  // reference unit, 1e-21 N^2 s / kg
};

// One virtual experiment. Scalars are stored in the config-file units
// (ordinary MHz, seconds, counts); the typed accessors below are the single
// conversion site to internal angular units.
struct ExperimentConfig {
  int n_ions = 7;
  double alpha = 3.205;
  double gamma_y = 4.0;
  double omega_z_mhz = 2.4;       // ordinary MHz
  double delta_397_mhz = -40.0;   // ordinary MHz
  double delta_866_mhz = 80.0;    // ordinary MHz, kept blue-detuned
  double rabi_397_mhz = 78.0;     // ordinary MHz
  double rabi_866_mhz = 55.0;     // ordinary MHz, fitted to the measured friction curve
  double theta_rad = 0.7853981633974483;   // pi/4
  double phi_y_rad = 0.35;  // out-of-plane repump tilt; bounds the y-axis temperature
  double e_e_over_mu0 = 13.0;
  double dt_s = 0.0;  // 0 = auto: 0.08 / omega_max
  long n_steps = 200000;
  long n_burn_in = 100000;
  long sample_stride = 20;
  std::uint64_t seed = 1;
  int repetitions = 50;

  IonSpecies species() const;
  TrapParams trap() const;
  LaserParams lasers() const;
  BathParams bath() const;
};

// Fixed 40Ca+ constants: mass 40 u, decay rate 1/(7.1 ns), 397/866 nm
// wavenumbers, 6% leak into the metastable state.
IonSpecies default_ca40();

// Conservative upper bound on the highest normal-mode angular frequency,
// used for the dt stability check and the auto dt.
double estimated_omega_max(const ExperimentConfig& cfg);

// Full invariant check; empty result means valid.
std::vector<std::string> validate_errors(const ExperimentConfig& cfg);

// Returns the normalized config (auto dt filled in); throws ConfigError
// with the per-field issue list otherwise. Idempotent.
ExperimentConfig validate(const ExperimentConfig& cfg);

// Flat "key = value" text. Unknown keys are rejected, missing keys take the
// defaults above, parse errors carry the line number.
ExperimentConfig load_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

std::string serialize_config(const ExperimentConfig& cfg);

// Stable FNV-1a digest of the serialized normalized config, as hex.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace iontrap
