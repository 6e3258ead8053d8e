#pragma once

#include <Eigen/Dense>
#include <vector>

#include "iontrap/config.hpp"
#include "iontrap/cooling.hpp"
#include "iontrap/rng.hpp"
#include "iontrap/statics.hpp"

namespace iontrap {

struct CrystalState {
  PositionMatrix positions;   // N x 3, m
  PositionMatrix velocities;  // N x 3, m/s
  double time = 0.0;          // s
};

// Per-axis friction and white force-noise intensity driving the crystal.
// The stationary single-ion temperature per axis is
//   T_a = S_a / (2 kB beta_a) = (D_a + m E_e / 2) / (kB beta_a).
struct NoiseModel {
  Eigen::Vector3d beta;             // N s/m per axis
  Eigen::Vector3d force_intensity;  // S_a = 2 D_photon,a + m E_e, N^2 s

  static NoiseModel from_cooling(const CoolingResponse& cooling,
                                 const BathParams& bath,
                                 const IonSpecies& species);
};

struct TrajectorySummary {
  PositionMatrix mean_positions;        // N x 3, time average
  Eigen::Vector3d velocity_second_moments;  // <v_a^2> per axis, (m/s)^2
  long sample_count = 0;
  std::vector<double> dx_samples;       // instantaneous outermost x spread
  std::vector<PositionMatrix> position_samples;  // only if requested
};

// -grad(potential_energy); exact O(N^2) pair loop.
PositionMatrix total_force(const PositionMatrix& positions,
                           const TrapParams& trap, const IonSpecies& species);

// Splitting integrator: half-kick, half-drift, exact per-axis
// Ornstein-Uhlenbeck velocity update, half-drift, half-kick. The OU
// sub-step is integrated in closed form, so the free-particle stationary
// variance is exact for any dt.
class LangevinIntegrator {
 public:
  LangevinIntegrator(const IonSpecies& species, const TrapParams& trap,
                     double dt);

  void set_noise(const NoiseModel& noise);
  const NoiseModel& noise() const { return noise_; }

  // Advances the state by one step; throws InstabilityError when any
  // velocity component exceeds 1e3 m/s.
  void step(CrystalState& state, Rng& rng) const;

  double dt() const { return dt_; }

 private:
  IonSpecies species_;
  TrapParams trap_;
  double dt_;
  NoiseModel noise_;
  Eigen::Vector3d ou_decay_;  // exp(-beta_a dt / m)
  Eigen::Vector3d ou_sigma_;  // stationary-consistent kick amplitude, m/s
};

// Linear-chain equilibrium at rest.
CrystalState make_chain_state(int n_ions, const TrapParams& trap,
                              const IonSpecies& species);

struct SegmentOptions {
  long n_burn_in = 0;
  long n_sample = 0;
  long stride = 20;
  bool collect_positions = false;
};

// Burn-in then sample one segment at fixed laser settings. The state is
// advanced in place so segments can be chained (quasi-static protocols).
TrajectorySummary run_segment(const LangevinIntegrator& integrator,
                              CrystalState& state, const SegmentOptions& opts,
                              Rng& rng);

struct ScheduleEntry {
  LaserParams lasers;
  long n_steps;
};

// Full trajectory under a laser schedule: burn-in on the first entry is
// discarded, the rest is sampled at the configured stride. The cooling
// response is re-evaluated (via the cache) at each schedule change.
TrajectorySummary run_trajectory(const ExperimentConfig& cfg,
                                 const std::vector<ScheduleEntry>& schedule,
                                 Rng& rng, CoolingCache& cache,
                                 bool collect_positions = false);

enum class SweepMode { Carried, FreshStart };

// One quasi-static pass over a monotone detuning grid (rad/s). Carried mode
// keeps the crystal state across grid points (hysteresis-capable);
// fresh-start re-equilibrates from the linear chain at each point.
std::vector<TrajectorySummary> quasi_static_sweep(
    const ExperimentConfig& cfg, const std::vector<double>& delta_grid,
    SweepMode mode, Rng& rng, CoolingCache& cache);

}  // namespace iontrap
