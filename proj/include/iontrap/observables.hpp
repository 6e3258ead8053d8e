#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "iontrap/dynamics.hpp"

namespace iontrap {

struct TransitionEstimate {
  double critical_value;  // units of the swept axis
  std::string method;     // e.g. "half-max-crossing/rising"
  double uncertainty;     // same units
};

struct TransitionEdges {
  std::optional<TransitionEstimate> rising;
  std::optional<TransitionEstimate> falling;
};

struct LinearFit {
  double slope;
  double intercept;
  double r_squared;
};

struct ImageGrid {
  int width = 0, height = 0;
  double pixel_pitch = 0.0;            // m per pixel, object space
  std::vector<double> intensities;     // row-major counts, >= 0
  double count(int ix, int iy) const { return intensities[iy * width + ix]; }
};

struct ImageOptions {
  int width = 160;
  int height = 64;
  double pixel_pitch = 20e-6 / 15.0;  // 20 um scale bar spans 15 pixels
  double psf_sigma_px = 1.0;          // optical point-spread, pixels
  double photon_budget_per_ion = 2000.0;
};

// Order parameter: x spread of the time-averaged ion positions.
double order_parameter_dx(const PositionMatrix& mean_positions);
double order_parameter_dx(const TrajectorySummary& summary);

// Kinetic temperature over a subset of axes (default: the xz plane).
// Requires at least 100 samples.
double kinetic_temperature(const TrajectorySummary& summary,
                           const IonSpecies& species, bool use_x = true,
                           bool use_y = false, bool use_z = true);

// Half-maximum crossing of the smoothed dx curve, linearly interpolated.
// Throws PhysicsError when the dx range is below significance * noise.
TransitionEstimate detect_transition(const std::vector<double>& axis,
                                     const std::vector<double>& dx_means,
                                     const std::vector<double>& dx_stds,
                                     double significance = 3.0);

// Weighted logistic fit of dx against the swept axis; the sigmoid midpoint
// is the transition estimate. Every grid point constrains the fit, so the
// estimate is considerably less noisy than a single threshold crossing.
// Throws PhysicsError when the fitted step is below significance * noise.
TransitionEstimate fit_transition(const std::vector<double>& axis,
                                  const std::vector<double>& dx_means,
                                  const std::vector<double>& dx_stds,
                                  double significance = 3.0);

// Rising and falling half-max crossings on either side of the dx maximum,
// for sweeps that enter and leave the zigzag window.
TransitionEdges detect_edges(const std::vector<double>& axis,
                             const std::vector<double>& dx_means,
                             const std::vector<double>& dx_stds,
                             double significance = 3.0);

// Ordinary least squares. Throws PhysicsError on degenerate xs.
LinearFit linear_fit(const std::vector<double>& xs,
                     const std::vector<double>& ys);

struct CalibrationResult {
  double e_e;          // N^2 s / kg
  double uncertainty;  // same units
  LinearFit fit;       // E_e as a function of alpha_c
  std::vector<double> map_e_e;      // simulated calibration points
  std::vector<double> map_alpha_c;
};

// Builds the simulated E_e -> alpha_c map with the supplied estimator
// (one alpha sweep + transition detection per point), fits a line, and
// inverts it at the measured alpha_c. Throws CalibrationRangeError when
// the measured alpha_c falls outside the simulated map.
CalibrationResult calibrate_bath(
    double measured_alpha_c,
    const std::function<TransitionEstimate(double e_e)>& alpha_c_estimator,
    const std::vector<double>& e_e_grid);

// Histogram of the xz-projected position samples convolved with a Gaussian
// PSF; total counts are normalized to photon_budget_per_ion * N.
ImageGrid render_image(const std::vector<PositionMatrix>& position_samples,
                       const ImageOptions& options);

// 8-bit P5 graymap plus a text sidecar with pixel pitch and the 20 um
// scale-bar geometry.
void write_pgm(const ImageGrid& grid, const std::string& path,
               const std::string& sidecar_note = "");

}  // namespace iontrap
