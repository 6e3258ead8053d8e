#include "iontrap/statics.hpp"

#include <cmath>
#include <string>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

namespace c = constants;

namespace {
constexpr double kMinPairDistance = 1e-9;  // m

void check_distances(const PositionMatrix& p) {
  const int n = (int)p.rows();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if ((p.row(i) - p.row(j)).norm() < kMinPairDistance)
        throw PhysicsError("coincident ions: pair (" + std::to_string(i) +
                           ", " + std::to_string(j) + ") closer than 1 nm");
}

Eigen::Vector3d trap_curvatures(const TrapParams& trap,
                                const IonSpecies& species) {
  const double wz2 = trap.omega_z * trap.omega_z;
  return species.mass *
         Eigen::Vector3d(trap.alpha * trap.alpha * wz2,
                         trap.gamma_y * trap.gamma_y * wz2, wz2);
}
}  // namespace

double characteristic_length(const TrapParams& trap,
                             const IonSpecies& species) {
  const double ke2 = c::coulomb_prefactor;
  return std::cbrt(ke2 / (species.mass * trap.omega_z * trap.omega_z));
}

double potential_energy(const PositionMatrix& p, const TrapParams& trap,
                        const IonSpecies& species) {
  check_distances(p);
  const Eigen::Vector3d k = trap_curvatures(trap, species);
  const int n = (int)p.rows();
  double e = 0.0;
  for (int i = 0; i < n; ++i)
    e += 0.5 * (k.array() * p.row(i).transpose().array().square()).sum();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      e += c::coulomb_prefactor / (p.row(i) - p.row(j)).norm();
  return e;
}

PositionMatrix potential_gradient(const PositionMatrix& p,
                                  const TrapParams& trap,
                                  const IonSpecies& species) {
  check_distances(p);
  const Eigen::Vector3d k = trap_curvatures(trap, species);
  const int n = (int)p.rows();
  PositionMatrix g(n, 3);
  for (int i = 0; i < n; ++i)
    g.row(i) = (k.array() * p.row(i).transpose().array()).transpose();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const Eigen::Vector3d d = p.row(i) - p.row(j);
      const double r = d.norm();
      const Eigen::Vector3d f = c::coulomb_prefactor * d / (r * r * r);
      g.row(i) -= f.transpose();
      g.row(j) += f.transpose();
    }
  return g;
}

Eigen::MatrixXd hessian(const PositionMatrix& p, const TrapParams& trap,
                        const IonSpecies& species) {
  check_distances(p);
  const Eigen::Vector3d k = trap_curvatures(trap, species);
  const int n = (int)p.rows();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) h(3 * i + a, 3 * i + a) = k(a);

  // Coulomb pair block: d2/dxa dxb of ke2/r is ke2 (3 da db - r^2 dab)/r^5.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const Eigen::Vector3d d = p.row(i) - p.row(j);
      const double r = d.norm();
      // outer product evaluated first so the block is symmetric bit-for-bit
      const Eigen::Matrix3d outer = (d * d.transpose()).eval();
      const Eigen::Matrix3d block =
          c::coulomb_prefactor *
          (3.0 * outer - r * r * Eigen::Matrix3d::Identity()) /
          std::pow(r, 5);
      h.block<3, 3>(3 * i, 3 * i) += block;
      h.block<3, 3>(3 * j, 3 * j) += block;
      h.block<3, 3>(3 * i, 3 * j) -= block;
      h.block<3, 3>(3 * j, 3 * i) -= block;
    }
  return h;
}

namespace {

PositionMatrix seed_positions(int n, const TrapParams& trap,
                              const IonSpecies& species, SeedPolicy policy) {
  const double l = characteristic_length(trap, species);
  PositionMatrix p = PositionMatrix::Zero(n, 3);
  for (int i = 0; i < n; ++i)
    p(i, 2) = (i - 0.5 * (n - 1)) * 1.5 * l;
  if (policy == SeedPolicy::Zigzag)
    for (int i = 0; i < n; ++i)
      p(i, 0) = (i % 2 == 0 ? 0.05 : -0.05) * l;
  return p;
}

}  // namespace

EquilibriumConfiguration equilibrium_positions(int n_ions,
                                               const TrapParams& trap,
                                               const IonSpecies& species,
                                               SeedPolicy policy) {
  if (n_ions < 1) throw PhysicsError("equilibrium_positions: n_ions < 1");
  const double l = characteristic_length(trap, species);
  const double force_scale = c::coulomb_prefactor / (l * l);
  const double tol = 1e-10 * force_scale;

  PositionMatrix p = seed_positions(n_ions, trap, species, policy);
  const int dim = 3 * n_ions;

  Eigen::Map<Eigen::VectorXd> x(p.data(), dim);
  // PositionMatrix is column-major (all x, all y, all z); map accordingly.
  auto pack = [&](const PositionMatrix& m) {
    return Eigen::Map<const Eigen::VectorXd>(m.data(), dim).eval();
  };

  double damping = 1e-3 * species.mass * trap.omega_z * trap.omega_z;
  const int max_iter = 500;
  double e = potential_energy(p, trap, species);
  for (int iter = 0; iter < max_iter; ++iter) {
    PositionMatrix gm = potential_gradient(p, trap, species);
    const double gnorm = gm.array().abs().maxCoeff();
    if (gnorm < tol) {
      return EquilibriumConfiguration{p, e, gnorm};
    }
    // hessian() uses coordinate order 3*i+a; build a column-major-ordered
    // copy to match the packed vector layout.
    Eigen::MatrixXd h_ia = hessian(p, trap, species);
    Eigen::MatrixXd h(dim, dim);
    const int n = n_ions;
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < 3; ++a)
        for (int j = 0; j < n; ++j)
          for (int b = 0; b < 3; ++b)
            h(a * n + i, b * n + j) = h_ia(3 * i + a, 3 * j + b);

    Eigen::VectorXd g = pack(gm);
    // Damped Newton with backtracking; damping keeps the step a descent
    // direction near saddles.
    for (int attempt = 0; attempt < 60; ++attempt) {
      Eigen::MatrixXd hd = h + damping * Eigen::MatrixXd::Identity(dim, dim);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hd);
      Eigen::VectorXd step = ldlt.solve(-g);
      if (ldlt.info() != Eigen::Success || !step.allFinite() ||
          step.dot(g) >= 0) {
        damping *= 10.0;
        continue;
      }
      PositionMatrix trial = p;
      Eigen::Map<Eigen::VectorXd>(trial.data(), dim) += step;
      double et;
      try {
        et = potential_energy(trial, trap, species);
      } catch (const PhysicsError&) {
        damping *= 10.0;
        continue;
      }
      if (et <= e + 1e-12 * std::abs(e)) {
        p = trial;
        e = et;
        damping = std::max(damping * 0.3,
                           1e-8 * species.mass * trap.omega_z * trap.omega_z);
        break;
      }
      damping *= 10.0;
    }
  }
  throw PhysicsError("equilibrium_positions: no convergence after " +
                     std::to_string(max_iter) + " iterations");
}

ModeSpectrum normal_modes(const Eigen::MatrixXd& hess,
                          const IonSpecies& species) {
  if (hess.rows() != hess.cols())
    throw PhysicsError("normal_modes: matrix not square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hess / species.mass);
  if (solver.info() != Eigen::Success)
    throw PhysicsError("normal_modes: eigensolver failed");
  ModeSpectrum spec;
  spec.frequencies_squared = solver.eigenvalues();  // ascending
  spec.eigenvectors = solver.eigenvectors();
  spec.soft_mode_index = 0;
  return spec;
}

double critical_alpha(int n_ions, const TrapParams& trap,
                      const IonSpecies& species, double rel_tol) {
  if (n_ions < 2) throw PhysicsError("critical_alpha: need at least 2 ions");

  // The chain's axial equilibrium does not depend on alpha; compute it once
  // at a safely-linear alpha and rebuild only the Hessian while bisecting.
  TrapParams chain_trap = trap;
  chain_trap.alpha = std::max(4.0, 2.0 * n_ions);
  chain_trap.gamma_y = 2.0 * chain_trap.alpha;
  const EquilibriumConfiguration chain = equilibrium_positions(
      n_ions, chain_trap, species, SeedPolicy::LinearChain);

  auto soft_mode_sq = [&](double alpha) {
    TrapParams t = trap;
    t.alpha = alpha;
    t.gamma_y = std::max(trap.gamma_y, 2.0 * alpha);
    const ModeSpectrum spec =
        normal_modes(hessian(chain.positions, t, species), species);
    return spec.frequencies_squared(spec.soft_mode_index);
  };

  double lo = 1.0, hi = 2.0;
  while (soft_mode_sq(hi) < 0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e3) throw PhysicsError("critical_alpha: bracket failure");
  }
  if (soft_mode_sq(lo) >= 0) {
    if (n_ions == 2) return 1.0;  // softens exactly at omega_x = omega_z
    throw PhysicsError("critical_alpha: bracket failure at lower end");
  }
  while ((hi - lo) > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (soft_mode_sq(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace iontrap
