#include "iontrap/observables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

namespace c = constants;

double order_parameter_dx(const PositionMatrix& mean_positions) {
  if (mean_positions.rows() < 2)
    throw PhysicsError("order_parameter_dx: need at least 2 ions");
  return mean_positions.col(0).maxCoeff() - mean_positions.col(0).minCoeff();
}

double order_parameter_dx(const TrajectorySummary& summary) {
  return order_parameter_dx(summary.mean_positions);
}

double kinetic_temperature(const TrajectorySummary& summary,
                           const IonSpecies& species, bool use_x, bool use_y,
                           bool use_z) {
  if (summary.sample_count < 100)
    throw PhysicsError("kinetic_temperature: need at least 100 samples");
  const bool axes[3] = {use_x, use_y, use_z};
  double sum = 0.0;
  int n_axes = 0;
  for (int a = 0; a < 3; ++a) {
    if (!axes[a]) continue;
    sum += summary.velocity_second_moments(a);
    ++n_axes;
  }
  if (n_axes == 0) throw PhysicsError("kinetic_temperature: no axes selected");
  return species.mass * sum / (c::k_boltzmann * n_axes);
}

namespace {

std::vector<double> smooth3(const std::vector<double>& v) {
  const size_t n = v.size();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    double acc = v[i];
    int cnt = 1;
    if (i > 0) { acc += v[i - 1]; ++cnt; }
    if (i + 1 < n) { acc += v[i + 1]; ++cnt; }
    out[i] = acc / cnt;
  }
  return out;
}

struct Crossing {
  double value;
  double uncertainty;
  bool rising;
  double slope;
};

std::vector<Crossing> threshold_crossings(const std::vector<double>& axis,
                                          const std::vector<double>& dx,
                                          const std::vector<double>& stds,
                                          double half) {
  std::vector<Crossing> out;
  for (size_t i = 0; i + 1 < dx.size(); ++i) {
    const double a = dx[i] - half, b = dx[i + 1] - half;
    if (a == 0.0 && b == 0.0) continue;
    if ((a <= 0.0 && b > 0.0) || (a >= 0.0 && b < 0.0)) {
      const double frac = a / (a - b);
      const double x = axis[i] + frac * (axis[i + 1] - axis[i]);
      const double spacing = std::abs(axis[i + 1] - axis[i]);
      const double slope = (dx[i + 1] - dx[i]) / (axis[i + 1] - axis[i]);
      const double noise = 0.5 * (stds[i] + stds[i + 1]);
      const double unc =
          std::max(0.5 * spacing,
                   slope != 0.0 ? std::abs(noise / slope) : spacing);
      out.push_back({x, unc, b > a, slope});
    }
  }
  return out;
}

void check_transition_inputs(const std::vector<double>& axis,
                             const std::vector<double>& dx_means,
                             const std::vector<double>& dx_stds,
                             double significance) {
  if (axis.size() < 5 || axis.size() != dx_means.size() ||
      axis.size() != dx_stds.size())
    throw PhysicsError("detect_transition: need >= 5 matching grid points");
  for (size_t i = 0; i + 1 < axis.size(); ++i)
    if (!(axis[i + 1] > axis[i]))
      throw PhysicsError("detect_transition: axis must ascend");
  const double lo = *std::min_element(dx_means.begin(), dx_means.end());
  const double hi = *std::max_element(dx_means.begin(), dx_means.end());
  const double noise = std::accumulate(dx_stds.begin(), dx_stds.end(), 0.0) /
                       dx_stds.size();
  if (!(hi - lo > significance * noise) || hi == lo)
    throw PhysicsError(
        "detect_transition: no transition (dx range below significance)");
}

}  // namespace

TransitionEstimate detect_transition(const std::vector<double>& axis,
                                     const std::vector<double>& dx_means,
                                     const std::vector<double>& dx_stds,
                                     double significance) {
  check_transition_inputs(axis, dx_means, dx_stds, significance);
  const auto dx = smooth3(dx_means);
  const double lo = *std::min_element(dx.begin(), dx.end());
  const double hi = *std::max_element(dx.begin(), dx.end());
  auto crossings = threshold_crossings(axis, dx, dx_stds, 0.5 * (lo + hi));
  if (crossings.empty())
    throw PhysicsError("detect_transition: no half-maximum crossing found");
  const auto& best = *std::max_element(
      crossings.begin(), crossings.end(),
      [](const Crossing& a, const Crossing& b) {
        return std::abs(a.slope) < std::abs(b.slope);
      });
  return TransitionEstimate{
      best.value,
      best.rising ? "half-max-crossing/rising" : "half-max-crossing/falling",
      best.uncertainty};
}

TransitionEstimate fit_transition(const std::vector<double>& axis,
                                  const std::vector<double>& dx_means,
                                  const std::vector<double>& dx_stds,
                                  double significance) {
  check_transition_inputs(axis, dx_means, dx_stds, significance);
  const size_t n = axis.size();
  const double mean_std =
      std::accumulate(dx_stds.begin(), dx_stds.end(), 0.0) / n;
  // Floor the per-point errors so an accidentally tiny standard error
  // cannot dominate the weighted fit.
  const double floor_std = std::max(0.1 * mean_std, 1e-30);
  std::vector<double> w(n);
  for (size_t i = 0; i < n; ++i) {
    const double s = std::max(dx_stds[i], floor_std);
    w[i] = 1.0 / (s * s);
  }
  const double span = axis.back() - axis.front();
  double mean_step = span / static_cast<double>(n - 1);

  // For fixed midpoint x0 and width, the model dx = lo + amp * s(axis) with
  // s = 1 / (1 + exp((axis - x0) / width)) is linear in (lo, amp): solve the
  // 2x2 weighted normal equations in closed form and scan (x0, width).
  const auto chi2_at = [&](double x0, double width, double* amp_out) {
    double sw = 0, ss = 0, sss = 0, sy = 0, ssy = 0;
    std::vector<double> sig(n);
    for (size_t i = 0; i < n; ++i) {
      const double s = 1.0 / (1.0 + std::exp((axis[i] - x0) / width));
      sig[i] = s;
      sw += w[i];
      ss += w[i] * s;
      sss += w[i] * s * s;
      sy += w[i] * dx_means[i];
      ssy += w[i] * s * dx_means[i];
    }
    const double det = sw * sss - ss * ss;
    if (!(std::abs(det) > 1e-300)) return std::numeric_limits<double>::max();
    const double lo = (sss * sy - ss * ssy) / det;
    const double amp = (sw * ssy - ss * sy) / det;
    double chi2 = 0;
    for (size_t i = 0; i < n; ++i) {
      const double r = dx_means[i] - lo - amp * sig[i];
      chi2 += w[i] * r * r;
    }
    if (amp_out) *amp_out = amp;
    return chi2;
  };

  // Profile chi^2 over the midpoint: minimize over width (geometric grid)
  // and the linear parameters at every candidate x0.
  const int n_x0 = 400;
  std::vector<double> x0s(n_x0), prof(n_x0);
  std::vector<double> widths;
  for (double width = 0.3 * mean_step; width < 0.6 * span; width *= 1.5)
    widths.push_back(width);
  double best_chi2 = std::numeric_limits<double>::max();
  double best_x0 = axis.front(), best_amp = 0;
  int best_k = 0;
  for (int k = 0; k < n_x0; ++k) {
    const double x0 = axis.front() + span * (k + 0.5) / n_x0;
    x0s[k] = x0;
    double p = std::numeric_limits<double>::max();
    for (double width : widths) {
      double amp = 0;
      const double chi2 = chi2_at(x0, width, &amp);
      if (chi2 < p) p = chi2;
      if (chi2 < best_chi2) {
        best_chi2 = chi2;
        best_x0 = x0;
        best_amp = amp;
        best_k = k;
      }
    }
    prof[k] = p;
  }
  if (!(std::abs(best_amp) > significance * mean_std))
    throw PhysicsError(
        "fit_transition: no transition (fitted step below significance)");
  // Delta-chi^2 = 1 interval, inflated by the reduced chi^2 when the model
  // underfits the scatter (conservative against misquoted errors).
  const double dof = std::max<double>(1.0, static_cast<double>(n) - 4.0);
  const double thresh = best_chi2 + std::max(1.0, best_chi2 / dof);
  double left = x0s.front(), right = x0s.back();
  for (int k = best_k; k >= 0; --k)
    if (prof[k] > thresh) { left = x0s[k]; break; }
  for (int k = best_k; k < n_x0; ++k)
    if (prof[k] > thresh) { right = x0s[k]; break; }
  const double unc =
      std::max(0.5 * (right - left), 0.25 * mean_step);
  return TransitionEstimate{
      best_x0, best_amp > 0 ? "logistic-fit/falling" : "logistic-fit/rising",
      unc};
}

TransitionEdges detect_edges(const std::vector<double>& axis,
                             const std::vector<double>& dx_means,
                             const std::vector<double>& dx_stds,
                             double significance) {
  check_transition_inputs(axis, dx_means, dx_stds, significance);
  const auto dx = smooth3(dx_means);
  TransitionEdges edges;
  const size_t imax =
      std::max_element(dx.begin(), dx.end()) - dx.begin();
  const double hi = dx[imax];
  // Each edge is referenced to the noise floor of its own plateau side: the
  // two "off" baselines can sit at different levels (e.g. a hotter, more
  // slowly averaging tail on one side), and a global half-maximum would then
  // trigger inside the higher baseline.
  const double lo_left =
      *std::min_element(dx.begin(), dx.begin() + imax + 1);
  const double lo_right = *std::min_element(dx.begin() + imax, dx.end());
  double best_rise = 0.0, best_fall = 0.0;
  for (const auto& cr :
       threshold_crossings(axis, dx, dx_stds, 0.5 * (lo_left + hi))) {
    if (cr.rising && cr.value <= axis[imax] &&
        (!edges.rising || std::abs(cr.slope) > best_rise)) {
      best_rise = std::abs(cr.slope);
      edges.rising = TransitionEstimate{cr.value, "half-max-crossing/rising",
                                        cr.uncertainty};
    }
  }
  for (const auto& cr :
       threshold_crossings(axis, dx, dx_stds, 0.5 * (lo_right + hi))) {
    if (!cr.rising && cr.value >= axis[imax] &&
        (!edges.falling || std::abs(cr.slope) > best_fall)) {
      best_fall = std::abs(cr.slope);
      edges.falling = TransitionEstimate{
          cr.value, "half-max-crossing/falling", cr.uncertainty};
    }
  }
  return edges;
}

LinearFit linear_fit(const std::vector<double>& xs,
                     const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw PhysicsError("linear_fit: need >= 2 points");
  const double n = double(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw PhysicsError("linear_fit: degenerate xs");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

CalibrationResult calibrate_bath(
    double measured_alpha_c,
    const std::function<TransitionEstimate(double e_e)>& alpha_c_estimator,
    const std::vector<double>& e_e_grid) {
  if (e_e_grid.size() < 2)
    throw PhysicsError("calibrate_bath: need >= 2 E_e grid points");

  CalibrationResult result;
  std::vector<double> alpha_unc;
  for (double e_e : e_e_grid) {
    const TransitionEstimate t = alpha_c_estimator(e_e);
    result.map_e_e.push_back(e_e);
    result.map_alpha_c.push_back(t.critical_value);
    alpha_unc.push_back(t.uncertainty);
  }

  const double amin =
      *std::min_element(result.map_alpha_c.begin(), result.map_alpha_c.end());
  const double amax =
      *std::max_element(result.map_alpha_c.begin(), result.map_alpha_c.end());
  const double margin = 0.05 * (amax - amin);
  if (measured_alpha_c < amin - margin || measured_alpha_c > amax + margin)
    throw CalibrationRangeError(
        "calibrate_bath: measured alpha_c outside the simulated map");

  result.fit = linear_fit(result.map_alpha_c, result.map_e_e);
  result.e_e = result.fit.slope * measured_alpha_c + result.fit.intercept;

  // Propagated uncertainty: fit residual scatter plus the slope acting on
  // the typical alpha_c estimation error.
  const size_t n = result.map_e_e.size();
  double ss_res = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double pred =
        result.fit.slope * result.map_alpha_c[i] + result.fit.intercept;
    ss_res += (result.map_e_e[i] - pred) * (result.map_e_e[i] - pred);
  }
  const double resid_sd =
      n > 2 ? std::sqrt(ss_res / double(n - 2)) : 0.0;
  const double mean_aunc =
      std::accumulate(alpha_unc.begin(), alpha_unc.end(), 0.0) / double(n);
  result.uncertainty = std::hypot(resid_sd,
                                  std::abs(result.fit.slope) * mean_aunc);
  return result;
}

ImageGrid render_image(const std::vector<PositionMatrix>& position_samples,
                       const ImageOptions& options) {
  if (position_samples.empty())
    throw PhysicsError("render_image: no position samples");
  const int n_ions = (int)position_samples.front().rows();

  ImageGrid grid;
  grid.width = options.width;
  grid.height = options.height;
  grid.pixel_pitch = options.pixel_pitch;
  grid.intensities.assign((size_t)options.width * options.height, 0.0);

  // View along y: z maps to the horizontal axis, x to the vertical.
  std::vector<double> hist(grid.intensities.size(), 0.0);
  for (const auto& p : position_samples) {
    for (int i = 0; i < n_ions; ++i) {
      const double px = p(i, 2) / options.pixel_pitch + 0.5 * options.width;
      const double py = p(i, 0) / options.pixel_pitch + 0.5 * options.height;
      const int ix = (int)std::floor(px);
      const int iy = (int)std::floor(py);
      if (ix < 0 || ix >= options.width || iy < 0 || iy >= options.height)
        continue;
      hist[(size_t)iy * options.width + ix] += 1.0;
    }
  }

  // Separable Gaussian PSF.
  const double sigma = options.psf_sigma_px;
  const int half = std::max(1, (int)std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * half + 1);
  double ksum = 0.0;
  for (int k = -half; k <= half; ++k) {
    kernel[k + half] = std::exp(-0.5 * k * k / (sigma * sigma));
    ksum += kernel[k + half];
  }
  for (auto& k : kernel) k /= ksum;

  std::vector<double> tmp(hist.size(), 0.0);
  for (int y = 0; y < options.height; ++y)
    for (int x = 0; x < options.width; ++x) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int xx = std::clamp(x + k, 0, options.width - 1);
        acc += kernel[k + half] * hist[(size_t)y * options.width + xx];
      }
      tmp[(size_t)y * options.width + x] = acc;
    }
  for (int y = 0; y < options.height; ++y)
    for (int x = 0; x < options.width; ++x) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int yy = std::clamp(y + k, 0, options.height - 1);
        acc += kernel[k + half] * tmp[(size_t)yy * options.width + x];
      }
      grid.intensities[(size_t)y * options.width + x] = acc;
    }

  const double total = std::accumulate(grid.intensities.begin(),
                                       grid.intensities.end(), 0.0);
  const double target = options.photon_budget_per_ion * n_ions;
  if (total > 0.0)
    for (auto& v : grid.intensities) v *= target / total;
  return grid;
}

void write_pgm(const ImageGrid& grid, const std::string& path,
               const std::string& sidecar_note) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PhysicsError("write_pgm: cannot open '" + path + "'");
  const double peak = *std::max_element(grid.intensities.begin(),
                                        grid.intensities.end());
  out << "P5\n" << grid.width << " " << grid.height << "\n255\n";
  for (double v : grid.intensities) {
    const int level =
        peak > 0 ? (int)std::lround(255.0 * v / peak) : 0;
    out.put((char)std::clamp(level, 0, 255));
  }
  out.close();

  std::ofstream side(path + ".txt");
  side << "pixel_pitch_um = " << grid.pixel_pitch * 1e6 << "\n";
  side << "scale_bar_um = 20\n";
  side << "scale_bar_px = " << 20e-6 / grid.pixel_pitch << "\n";
  side << "width_px = " << grid.width << "\n";
  side << "height_px = " << grid.height << "\n";
  if (!sidecar_note.empty()) side << sidecar_note << "\n";
}

}  // namespace iontrap
