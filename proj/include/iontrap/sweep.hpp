#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iontrap/config.hpp"
#include "iontrap/dynamics.hpp"
#include "iontrap/observables.hpp"

namespace iontrap {

struct CellStats {
  double dx_mean_um = 0.0;
  double dx_std_um = 0.0;
  double t_pred_mk = 0.0;  // NaN on the heating side
  double t_kin_mk = 0.0;
  int n_reps = 0;
  bool hysteresis = false;
};

// Grid of repetition-averaged observables over (delta, alpha). Rows are
// stored (and written) in grid order: alpha outer, delta inner.
struct SweepResult {
  std::vector<double> delta_mhz;  // strictly monotone
  std::vector<double> alpha;      // strictly monotone
  std::vector<CellStats> cells;   // alpha-major
  std::string config_hash;
  std::uint64_t seed = 0;

  CellStats& cell(size_t ia, size_t id) {
    return cells[ia * delta_mhz.size() + id];
  }
  const CellStats& cell(size_t ia, size_t id) const {
    return cells[ia * delta_mhz.size() + id];
  }
};

// Number of workers: explicit argument, else the IONTRAP_WORKERS
// environment variable, else hardware concurrency.
int resolve_worker_count(int requested = 0);

// Repetition-averaged sweep over the (delta, alpha) grid. Every
// (cell, repetition) draws its RNG stream from (seed, cell index, rep), so
// the result is independent of worker scheduling. reps = 0 uses
// cfg.repetitions. Carried mode runs forward and reverse passes per
// repetition and flags cells where they disagree (hysteresis); reported
// values come from the pass in grid order.
SweepResult run_sweep(const ExperimentConfig& cfg,
                      const std::vector<double>& deltas_mhz,
                      const std::vector<double>& alphas, SweepMode mode,
                      int reps = 0, int workers = 0);

// Falling-edge transition point of dx(alpha) at a fixed detuning.
TransitionEstimate estimate_alpha_c(const ExperimentConfig& cfg,
                                    double delta_mhz,
                                    const std::vector<double>& alphas,
                                    int reps = 0, int workers = 0);

struct LocusRow {
  double alpha;
  double delta_rise_mhz, delta_rise_unc_mhz;  // NaN when not detected
  double delta_fall_mhz, delta_fall_unc_mhz;
  double t_c_mk;  // kinetic temperature interpolated at the rising edge
};

// Per-alpha critical detunings and critical temperature of a phase diagram.
std::vector<LocusRow> critical_locus(const SweepResult& result);

std::string sweep_to_csv(const SweepResult& result);
SweepResult sweep_from_csv(const std::string& csv);
void write_sweep_csv(const SweepResult& result, const std::string& path);

std::string locus_to_csv(const std::vector<LocusRow>& rows);

// beta(delta) and T_pred(delta) curves: delta_mhz, beta_over_beta0,
// t_pred_mk (nan where friction is non-positive).
std::string cooling_curves_csv(const ExperimentConfig& cfg,
                               const std::vector<double>& deltas_mhz);

}  // namespace iontrap
