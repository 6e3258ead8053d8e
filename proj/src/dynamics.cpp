#include "iontrap/dynamics.hpp"

#include <cmath>
#include <string>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

namespace c = constants;

namespace {
constexpr double kVelocityLimit = 1e3;  // m/s, parameter-error detector
}

NoiseModel NoiseModel::from_cooling(const CoolingResponse& cooling,
                                    const BathParams& bath,
                                    const IonSpecies& species) {
  NoiseModel n;
  n.beta = Eigen::Vector3d(cooling.beta_x, cooling.beta_y, cooling.beta_z);
  n.force_intensity =
      2.0 * cooling.d_photon.array() + species.mass * bath.e_e;
  return n;
}

PositionMatrix total_force(const PositionMatrix& p, const TrapParams& trap,
                           const IonSpecies& species) {
  return -potential_gradient(p, trap, species);
}

LangevinIntegrator::LangevinIntegrator(const IonSpecies& species,
                                       const TrapParams& trap, double dt)
    : species_(species), trap_(trap), dt_(dt) {
  set_noise(NoiseModel{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()});
}

void LangevinIntegrator::set_noise(const NoiseModel& noise) {
  noise_ = noise;
  const double m = species_.mass;
  for (int a = 0; a < 3; ++a) {
    const double beta = noise.beta(a);
    const double s = noise.force_intensity(a);
    const double gdt = beta * dt_ / m;
    ou_decay_(a) = std::exp(-gdt);
    // sigma^2 = S (1 - exp(-2 gamma dt)) / (2 m beta); -> S dt / m^2 as
    // beta -> 0. Valid on the heating side (beta < 0) as well.
    double var;
    if (std::abs(gdt) < 1e-12)
      var = s * dt_ / (m * m);
    else
      var = s * (-std::expm1(-2.0 * gdt)) / (2.0 * m * beta);
    ou_sigma_(a) = std::sqrt(std::max(var, 0.0));
  }
}

void LangevinIntegrator::step(CrystalState& state, Rng& rng) const {
  const int n = (int)state.positions.rows();
  const double half_dt = 0.5 * dt_;
  const double inv_m = 1.0 / species_.mass;

  PositionMatrix f = total_force(state.positions, trap_, species_);
  state.velocities += half_dt * inv_m * f;
  state.positions += half_dt * state.velocities;

  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a)
      state.velocities(i, a) = ou_decay_(a) * state.velocities(i, a) +
                               ou_sigma_(a) * rng.gaussian();

  state.positions += half_dt * state.velocities;
  f = total_force(state.positions, trap_, species_);
  state.velocities += half_dt * inv_m * f;
  state.time += dt_;

  if (!(state.velocities.array().abs().maxCoeff() < kVelocityLimit))
    throw InstabilityError(
        "integration unstable at t = " + std::to_string(state.time) +
        " s: |v| exceeded " + std::to_string(kVelocityLimit) + " m/s");
}

CrystalState make_chain_state(int n_ions, const TrapParams& trap,
                              const IonSpecies& species) {
  CrystalState s;
  s.positions = equilibrium_positions(n_ions, trap, species,
                                      SeedPolicy::LinearChain)
                    .positions;
  s.velocities = PositionMatrix::Zero(n_ions, 3);
  s.time = 0.0;
  return s;
}

TrajectorySummary run_segment(const LangevinIntegrator& integrator,
                              CrystalState& state, const SegmentOptions& opts,
                              Rng& rng) {
  if (opts.n_sample <= 0)
    throw PhysicsError("run_segment: empty sampling window");
  const int n = (int)state.positions.rows();

  for (long k = 0; k < opts.n_burn_in; ++k) integrator.step(state, rng);

  TrajectorySummary sum;
  sum.mean_positions = PositionMatrix::Zero(n, 3);
  sum.velocity_second_moments.setZero();

  for (long k = 0; k < opts.n_sample; ++k) {
    integrator.step(state, rng);
    if (k % opts.stride != 0) continue;
    sum.mean_positions += state.positions;
    sum.velocity_second_moments +=
        state.velocities.array().square().colwise().sum().matrix().transpose() /
        double(n);
    sum.dx_samples.push_back(state.positions.col(0).maxCoeff() -
                             state.positions.col(0).minCoeff());
    if (opts.collect_positions) sum.position_samples.push_back(state.positions);
    ++sum.sample_count;
  }
  sum.mean_positions /= double(sum.sample_count);
  sum.velocity_second_moments /= double(sum.sample_count);
  return sum;
}

TrajectorySummary run_trajectory(const ExperimentConfig& cfg,
                                 const std::vector<ScheduleEntry>& schedule,
                                 Rng& rng, CoolingCache& cache,
                                 bool collect_positions) {
  if (schedule.empty())
    throw PhysicsError("run_trajectory: empty schedule");
  const IonSpecies species = cfg.species();
  const TrapParams trap = cfg.trap();
  const BathParams bath = cfg.bath();

  LangevinIntegrator integrator(species, trap, cfg.dt_s);
  CrystalState state = make_chain_state(cfg.n_ions, trap, species);

  long total_sample_steps = 0;
  for (const auto& e : schedule) total_sample_steps += e.n_steps;
  if (total_sample_steps <= cfg.n_burn_in && schedule.size() == 1)
    throw PhysicsError("run_trajectory: empty sampling window after burn-in");

  const int n = cfg.n_ions;
  TrajectorySummary sum;
  sum.mean_positions = PositionMatrix::Zero(n, 3);
  sum.velocity_second_moments.setZero();

  bool first = true;
  for (const auto& entry : schedule) {
    integrator.set_noise(
        NoiseModel::from_cooling(cache.get(species, entry.lasers, bath), bath,
                                 species));
    SegmentOptions opts;
    opts.n_burn_in = first ? cfg.n_burn_in : 0;
    opts.n_sample = first ? entry.n_steps - cfg.n_burn_in : entry.n_steps;
    opts.stride = cfg.sample_stride;
    opts.collect_positions = collect_positions;
    if (opts.n_sample <= 0)
      throw PhysicsError("run_trajectory: empty sampling window after burn-in");
    first = false;

    TrajectorySummary part = run_segment(integrator, state, opts, rng);
    sum.mean_positions += part.mean_positions * double(part.sample_count);
    sum.velocity_second_moments +=
        part.velocity_second_moments * double(part.sample_count);
    sum.sample_count += part.sample_count;
    sum.dx_samples.insert(sum.dx_samples.end(), part.dx_samples.begin(),
                          part.dx_samples.end());
    if (collect_positions)
      sum.position_samples.insert(sum.position_samples.end(),
                                  part.position_samples.begin(),
                                  part.position_samples.end());
  }
  sum.mean_positions /= double(sum.sample_count);
  sum.velocity_second_moments /= double(sum.sample_count);
  return sum;
}

std::vector<TrajectorySummary> quasi_static_sweep(
    const ExperimentConfig& cfg, const std::vector<double>& delta_grid,
    SweepMode mode, Rng& rng, CoolingCache& cache) {
  if (delta_grid.empty())
    throw PhysicsError("quasi_static_sweep: empty grid");
  for (size_t i = 1; i + 1 < delta_grid.size(); ++i) {
    const bool up = delta_grid[1] > delta_grid[0];
    if ((delta_grid[i + 1] > delta_grid[i]) != up)
      throw PhysicsError("quasi_static_sweep: grid not monotone");
  }

  const IonSpecies species = cfg.species();
  const TrapParams trap = cfg.trap();
  const BathParams bath = cfg.bath();
  LangevinIntegrator integrator(species, trap, cfg.dt_s);

  std::vector<TrajectorySummary> out;
  out.reserve(delta_grid.size());
  CrystalState state = make_chain_state(cfg.n_ions, trap, species);

  for (double delta : delta_grid) {
    if (mode == SweepMode::FreshStart)
      state = make_chain_state(cfg.n_ions, trap, species);
    LaserParams lasers = cfg.lasers();
    lasers.delta_397 = delta;
    integrator.set_noise(NoiseModel::from_cooling(
        cache.get(species, lasers, bath), bath, species));
    SegmentOptions opts;
    opts.n_burn_in = cfg.n_burn_in;
    opts.n_sample = cfg.n_steps;
    opts.stride = cfg.sample_stride;
    out.push_back(run_segment(integrator, state, opts, rng));
  }
  return out;
}

}  // namespace iontrap
