#include "iontrap/cooling.hpp"

#include <cmath>
#include <limits>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/rng.hpp"

namespace iontrap {

namespace c = constants;

using Matrix3c = Eigen::Matrix3cd;
using Matrix9c = Eigen::Matrix<std::complex<double>, 9, 9>;
using Vector9c = Eigen::Matrix<std::complex<double>, 9, 1>;

Eigen::Vector3d beam_direction_397(const LaserParams& lasers) {
  return {std::sin(lasers.theta), 0.0, std::cos(lasers.theta)};
}

Eigen::Vector3d beam_direction_866(const LaserParams& lasers) {
  const double cp = std::cos(lasers.phi_y);
  return {std::sin(lasers.theta) * cp, std::sin(lasers.phi_y),
          std::cos(lasers.theta) * cp};
}

namespace {

// Kronecker product for the column-major vectorization vec(A rho B) =
// (B^T kron A) vec(rho).
Matrix9c kron(const Matrix3c& a, const Matrix3c& b) {
  Matrix9c out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      out.block<3, 3>(3 * i, 3 * j) = a(i, j) * b;
  return out;
}

// Liouvillian of the lambda system at effective detunings (rad/s).
// Basis: 0 = S, 1 = P, 2 = D.
Matrix9c liouvillian(const IonSpecies& species, const LaserParams& lasers,
                     double delta_eff, double delta_rep_eff) {
  const std::complex<double> im(0.0, 1.0);

  Matrix3c h = Matrix3c::Zero();
  h(0, 1) = h(1, 0) = 0.5 * lasers.omega_rabi;
  h(2, 1) = h(1, 2) = 0.5 * lasers.omega_rabi_repump;
  h(1, 1) = -delta_eff;
  h(2, 2) = -(delta_eff - delta_rep_eff);

  Matrix3c c_s = Matrix3c::Zero();  // P -> S decay
  c_s(0, 1) = std::sqrt(species.gamma1 * (1.0 - species.leak_fraction));
  Matrix3c c_d = Matrix3c::Zero();  // P -> D leak
  c_d(2, 1) = std::sqrt(species.gamma1 * species.leak_fraction);

  const Matrix3c eye = Matrix3c::Identity();
  Matrix9c l = -im * (kron(eye, h) - kron(h.transpose(), eye));
  for (const Matrix3c* cp : {&c_s, &c_d}) {
    const Matrix3c& cc = *cp;
    const Matrix3c cdc = cc.adjoint() * cc;
    l += kron(cc.conjugate(), cc) - 0.5 * kron(eye, cdc) -
         0.5 * kron(cdc.transpose(), eye);
  }
  return l;
}

LambdaSteadyState solve_steady(const IonSpecies& species,
                               const LaserParams& lasers, double delta_eff,
                               double delta_rep_eff) {
  Matrix9c a = liouvillian(species, lasers, delta_eff, delta_rep_eff);
  // Replace the first equation with the trace constraint; diagonal entries
  // of rho sit at vec indices 0, 4, 8.
  a.row(0).setZero();
  a(0, 0) = a(0, 4) = a(0, 8) = 1.0;
  Vector9c b = Vector9c::Zero();
  b(0) = 1.0;

  Eigen::FullPivLU<Matrix9c> lu(a);
  if (lu.rank() < 9)
    throw PhysicsError(
        "steady_state: degenerate Liouvillian null space (laser couplings "
        "leave the steady state underdetermined)");
  const Vector9c rho = lu.solve(b);

  LambdaSteadyState ss;
  ss.pop_s = rho(0).real();
  ss.pop_p = rho(4).real();
  ss.pop_d = rho(8).real();
  // vec index 3*col + row
  ss.coh_sp = rho(3);  // <S|rho|P>
  ss.coh_dp = rho(5);  // <D|rho|P> at (row 2, col 1) -> 3*1+2
  ss.coh_sd = rho(6);  // <S|rho|D>
  return ss;
}

}  // namespace

LambdaSteadyState steady_state(const IonSpecies& species,
                               const LaserParams& lasers,
                               const Eigen::Vector3d& velocity) {
  if (!velocity.allFinite())
    throw PhysicsError("steady_state: non-finite velocity");
  const double delta_eff =
      lasers.delta_397 - species.k1 * beam_direction_397(lasers).dot(velocity);
  const double delta_rep_eff =
      lasers.delta_866 - species.k2 * beam_direction_866(lasers).dot(velocity);
  return solve_steady(species, lasers, delta_eff, delta_rep_eff);
}

CoolingResponse cooling_response(const IonSpecies& species,
                                 const LaserParams& lasers,
                                 const BathParams& bath) {
  const Eigen::Vector3d b1 = beam_direction_397(lasers);
  const Eigen::Vector3d b2 = beam_direction_866(lasers);
  const double gamma = species.gamma1;

  auto pop_at = [&](const Eigen::Vector3d& v) {
    return steady_state(species, lasers, v).pop_p;
  };

  // Friction along the 397 beam: central difference well inside the
  // linear-response region.
  const double h1 = 0.01 * gamma / species.k1;
  const double dpop_ds1 =
      (pop_at(h1 * b1) - pop_at(-h1 * b1)) / (2.0 * h1);
  const double beta_beam = -c::hbar * species.k1 * gamma * dpop_ds1;

  // Repump friction along its own beam; only the leak-line scattering
  // recoils on 866 photons.
  const double h2 = 0.01 * gamma / species.k2;
  const double dpop_ds2 =
      (pop_at(h2 * b2) - pop_at(-h2 * b2)) / (2.0 * h2);
  const double beta_rep =
      -c::hbar * species.k2 * gamma * species.leak_fraction * dpop_ds2;

  CoolingResponse r;
  r.beta_beam = beta_beam;
  r.beta_z = beta_beam * std::cos(lasers.theta) * std::cos(lasers.theta);
  r.beta_x = beta_beam * std::sin(lasers.theta) * std::sin(lasers.theta);
  r.beta_y = beta_rep * std::sin(lasers.phi_y) * std::sin(lasers.phi_y);

  r.scatter_rate = gamma * pop_at(Eigen::Vector3d::Zero());

  // Absorption diffusion along the beam, emission isotropic (1/3 per axis).
  const double d0 = c::hbar * c::hbar * species.k1 * species.k1 *
                    r.scatter_rate;
  r.d_photon_beam = d0 * (1.0 + 1.0 / 3.0);
  for (int a = 0; a < 3; ++a)
    r.d_photon(a) = d0 * (b1(a) * b1(a) + 1.0 / 3.0);

  r.t_pred = (r.beta_beam > 0)
                 ? (r.d_photon_beam + 0.5 * species.mass * bath.e_e) /
                       (c::k_boltzmann * r.beta_beam)
                 : std::numeric_limits<double>::quiet_NaN();
  return r;
}

double predicted_temperature(const IonSpecies& species,
                             const LaserParams& lasers,
                             const BathParams& bath) {
  const CoolingResponse r = cooling_response(species, lasers, bath);
  if (!(r.beta_beam > 0))
    throw PhysicsError(
        "predicted_temperature: non-positive friction (heating side), "
        "temperature undefined");
  return r.t_pred;
}

double detuning_window(const IonSpecies& species, const LaserParams& lasers,
                       double delta_min, double delta_max, int n_points) {
  if (!(delta_max > delta_min) || n_points < 8)
    throw PhysicsError("detuning_window: bad sweep range");
  BathParams nobath{0.0, c::mu0};

  std::vector<double> deltas(n_points), beta(n_points);
  for (int i = 0; i < n_points; ++i) {
    deltas[i] =
        delta_min + (delta_max - delta_min) * i / double(n_points - 1);
    LaserParams l = lasers;
    l.delta_397 = deltas[i];
    beta[i] = cooling_response(species, l, nobath).beta_beam;
  }

  int imax = 0;
  for (int i = 1; i < n_points; ++i)
    if (beta[i] > beta[imax]) imax = i;
  if (!(beta[imax] > 0))
    throw PhysicsError(
        "detuning_window: friction never positive in the sweep range");
  if (imax == 0 || imax == n_points - 1)
    throw PhysicsError("detuning_window: beta maximum not bracketed");

  // Parabolic refinement of the maximum.
  const double dm = beta[imax - 1], d0 = beta[imax], dp = beta[imax + 1];
  const double denom = dm - 2.0 * d0 + dp;
  double delta_at_max = deltas[imax];
  if (denom != 0.0)
    delta_at_max += 0.5 * (dm - dp) / denom *
                    (deltas[imax + 1] - deltas[imax]);

  // Zero crossing nearest zero detuning.
  double best_zero = std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i + 1 < n_points; ++i) {
    if ((beta[i] > 0) == (beta[i + 1] > 0)) continue;
    const double z = deltas[i] + (deltas[i + 1] - deltas[i]) * beta[i] /
                                     (beta[i] - beta[i + 1]);
    if (std::isnan(best_zero) || std::abs(z) < std::abs(best_zero))
      best_zero = z;
  }
  if (std::isnan(best_zero))
    throw PhysicsError("detuning_window: no friction zero crossing in range");

  return std::abs(delta_at_max - best_zero) / (2.0 * c::pi);
}

RabiEstimate rabi_from_window(double delta_w_hz, const IonSpecies& species,
                              const LaserParams& lasers) {
  if (!(delta_w_hz > 0))
    throw CalibrationRangeError("rabi_from_window: degenerate window");

  const double sweep_min = -150.0 * c::mhz_to_angular;
  const double sweep_max = 30.0 * c::mhz_to_angular;
  auto window_at = [&](double omega) {
    LaserParams l = lasers;
    l.omega_rabi = omega;
    return detuning_window(species, l, sweep_min, sweep_max);
  };

  const double lo_mhz = 10.0, hi_mhz = 150.0, step_mhz = 5.0;
  std::vector<double> omegas, windows;
  for (double f = lo_mhz; f <= hi_mhz + 1e-9; f += step_mhz) {
    omegas.push_back(f * c::mhz_to_angular);
    windows.push_back(window_at(omegas.back()));
  }

  // OLS of the (monotone) map for the published linear coefficient.
  const size_t n = omegas.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double x = omegas[i] / (2.0 * c::pi);
    sx += x;
    sy += windows[i];
    sxx += x * x;
    sxy += x * windows[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;

  if (delta_w_hz < windows.front() || delta_w_hz > windows.back())
    throw CalibrationRangeError(
        "rabi_from_window: delta_w outside the tabulated range");

  size_t i = 0;
  while (i + 1 < n && windows[i + 1] < delta_w_hz) ++i;
  double a = omegas[i], b = omegas[i + 1];
  for (int it = 0; it < 60 && (b - a) > 1e-4 * b; ++it) {
    const double mid = 0.5 * (a + b);
    (window_at(mid) < delta_w_hz ? a : b) = mid;
  }
  return RabiEstimate{0.5 * (a + b), slope, intercept};
}

GuardResult dark_resonance_guard(const IonSpecies& species,
                                 const LaserParams& lasers, double sweep_min,
                                 double sweep_max, double pop_floor) {
  if (lasers.omega_rabi_repump <= 0 || lasers.omega_rabi <= 0)
    return {lasers, false};  // no lambda coherence possible
  if (lasers.delta_866 > sweep_max) return {lasers, false};

  auto min_pop = [&](double delta_rep) {
    LaserParams l = lasers;
    l.delta_866 = delta_rep;
    double lowest = 1.0;
    const int grid = 61;
    for (int i = 0; i < grid; ++i) {
      l.delta_397 = sweep_min + (sweep_max - sweep_min) * i / double(grid - 1);
      lowest = std::min(
          lowest, steady_state(species, l, Eigen::Vector3d::Zero()).pop_p);
    }
    return lowest;
  };

  LaserParams adjusted = lasers;
  for (int k = 1; k <= 60; ++k) {
    adjusted.delta_866 = k * c::mhz_to_angular;
    if (min_pop(adjusted.delta_866) >= pop_floor) break;
  }
  return {adjusted, true};
}

CoolingResponse CoolingCache::get(const IonSpecies& species,
                                  const LaserParams& lasers,
                                  const BathParams& bath) {
  auto q = [](double x, double quantum) {
    return (std::uint64_t)(std::int64_t)std::llround(x / quantum);
  };
  const double khz = 2.0 * c::pi * 1e3;
  std::uint64_t key = 0x9e3779b97f4a7c15ULL;
  for (std::uint64_t part :
       {q(lasers.delta_397, khz), q(lasers.delta_866, khz),
        q(lasers.omega_rabi, khz), q(lasers.omega_rabi_repump, khz),
        q(lasers.theta, 1e-7), q(lasers.phi_y, 1e-7), q(bath.e_e, 1e-25)}) {
    key ^= part + 0x9e3779b97f4a7c15ULL + (key << 6) + (key >> 2);
    key = splitmix64(key);
  }

  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = map_.find(key);
    if (it != map_.end()) return it->second;
  }
  const CoolingResponse r = cooling_response(species, lasers, bath);
  std::lock_guard<std::mutex> lock(mutex_);
  map_.emplace(key, r);
  return r;
}

}  // namespace iontrap
