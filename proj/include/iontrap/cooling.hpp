#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <mutex>
#include <unordered_map>

#include "iontrap/config.hpp"

namespace iontrap {

// Steady state of the S-P-D lambda system under both lasers.
struct LambdaSteadyState {
  double pop_s, pop_p, pop_d;           // populations, sum to 1
  std::complex<double> coh_sp, coh_dp;  // optical coherences
  std::complex<double> coh_sd;          // Raman coherence
};

// Laser response at one setting: directional friction, photon scattering,
// momentum diffusion, and the two-term predicted temperature.
struct CoolingResponse {
  double beta_beam;         // friction along the 397 beam, N s/m
  double beta_x, beta_y, beta_z;  // projected onto trap axes
  double scatter_rate;      // 397 photons/s
  Eigen::Vector3d d_photon;  // per-axis momentum diffusion, N^2 s
  double d_photon_beam;      // along the beam: hbar^2 k1^2 R (1 + 1/3)
  double t_pred;             // K; NaN when beta_beam <= 0
};

// 397 beam direction: angle theta to z in the xz plane.
Eigen::Vector3d beam_direction_397(const LaserParams& lasers);
// 866 beam: same in-plane direction, tilted by phi_y out of the plane.
Eigen::Vector3d beam_direction_866(const LaserParams& lasers);

// Solves the three-level optical Bloch equations at Doppler-shifted
// detunings for the unique trace-1 steady state. Throws PhysicsError if the
// steady state is degenerate (e.g. both lasers off).
LambdaSteadyState steady_state(const IonSpecies& species,
                               const LaserParams& lasers,
                               const Eigen::Vector3d& velocity);

// Friction by central finite difference of the scattering force at v = 0,
// diffusion from the scattering rate, and the predicted temperature
// T = (D_beam + m E_e / 2) / (kB beta_beam).
CoolingResponse cooling_response(const IonSpecies& species,
                                 const LaserParams& lasers,
                                 const BathParams& bath);

// Throws PhysicsError when the friction is non-positive (heating side).
double predicted_temperature(const IonSpecies& species,
                             const LaserParams& lasers,
                             const BathParams& bath);

// Width of the detuning window: distance from the beta zero crossing
// nearest zero detuning to the location of the beta maximum. The sweep
// range [delta_min, delta_max] (rad/s) must bracket both features.
// Returned in ordinary Hz.
double detuning_window(const IonSpecies& species, const LaserParams& lasers,
                       double delta_min, double delta_max,
                       int n_points = 561);

struct RabiEstimate {
  double omega_rabi;       // rad/s
  double fit_slope;        // d(delta_w [Hz]) / d(Omega/2pi [Hz]) of the map
  double fit_intercept;    // Hz
};

// Inverts the monotone map Omega -> delta_w by tabulation and bisection.
// delta_w_hz is an ordinary frequency. Throws CalibrationRangeError when
// delta_w falls outside the tabulated range.
RabiEstimate rabi_from_window(double delta_w_hz, const IonSpecies& species,
                              const LaserParams& lasers);

struct GuardResult {
  LaserParams lasers;
  bool adjusted;
};

// Keeps the repump clear of the dark resonance over a planned detuning
// sweep: if the Raman condition is reachable, delta_866 is raised to the
// smallest blue value keeping pop_p above pop_floor across the sweep.
GuardResult dark_resonance_guard(const IonSpecies& species,
                                 const LaserParams& lasers, double sweep_min,
                                 double sweep_max, double pop_floor = 1e-3);

// Memoized cooling responses keyed on quantized laser settings; safe for
// concurrent lookup/insert.
class CoolingCache {
 public:
  CoolingResponse get(const IonSpecies& species, const LaserParams& lasers,
                      const BathParams& bath);

 private:
  std::mutex mutex_;
  std::unordered_map<std::uint64_t, CoolingResponse> map_;
};

}  // namespace iontrap
