#pragma once

#include <Eigen/Dense>

#include "iontrap/config.hpp"

namespace iontrap {

using PositionMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;

struct EquilibriumConfiguration {
  PositionMatrix positions;  // N x 3, m
  double energy;             // J
  double gradient_norm;      // residual max |dE/dx|, N
};

struct ModeSpectrum {
  Eigen::VectorXd frequencies_squared;  // 3N, ascending, (rad/s)^2
  Eigen::MatrixXd eigenvectors;         // 3N x 3N, orthonormal columns
  int soft_mode_index;                  // index of the smallest frequency^2
};

enum class SeedPolicy { LinearChain, Zigzag };

// Two-ion Coulomb length scale l = (e^2/(4 pi eps0 m omega_z^2))^(1/3).
double characteristic_length(const TrapParams& trap, const IonSpecies& species);

// Harmonic pseudopotential plus pairwise Coulomb energy.
// Throws PhysicsError if any pair is closer than 1 nm.
double potential_energy(const PositionMatrix& positions, const TrapParams& trap,
                        const IonSpecies& species);

// dE/dr, N x 3 (force is the negative of this).
PositionMatrix potential_gradient(const PositionMatrix& positions,
                                  const TrapParams& trap,
                                  const IonSpecies& species);

// Analytic second derivatives, 3N x 3N, coordinate index 3*i + axis.
Eigen::MatrixXd hessian(const PositionMatrix& positions, const TrapParams& trap,
                        const IonSpecies& species);

// Local minimum (or, from the collinear seed, the chain stationary point)
// of the potential by damped Newton descent. Deterministic per policy.
EquilibriumConfiguration equilibrium_positions(int n_ions,
                                               const TrapParams& trap,
                                               const IonSpecies& species,
                                               SeedPolicy policy);

// Mass-scaled eigendecomposition of a Hessian. Negative frequency^2 entries
// signal an unstable configuration.
ModeSpectrum normal_modes(const Eigen::MatrixXd& hess,
                          const IonSpecies& species);

// Zero-temperature critical anisotropy: the alpha at which the linear
// chain's lowest mode frequency^2 crosses zero, by bisection to rel_tol.
double critical_alpha(int n_ions, const TrapParams& trap,
                      const IonSpecies& species, double rel_tol = 1e-4);

}  // namespace iontrap
