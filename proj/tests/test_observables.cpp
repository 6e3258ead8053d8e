#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/observables.hpp"
#include "iontrap/rng.hpp"

using namespace iontrap;
namespace c = iontrap::constants;

namespace {

PositionMatrix random_positions(int n, double scale, Rng& rng) {
  PositionMatrix p(n, 3);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) p(i, a) = scale * rng.gaussian();
  return p;
}

// Smooth sigmoid step on an ascending axis.
std::vector<double> sigmoid(const std::vector<double>& axis, double x0,
                            double width, double amplitude) {
  std::vector<double> out;
  for (double x : axis)
    out.push_back(amplitude / (1.0 + std::exp(-(x - x0) / width)));
  return out;
}

}  // namespace

TEST_CASE("order parameter is translation and reflection invariant") {
  Rng rng(17);
  const PositionMatrix p = random_positions(7, 1e-5, rng);
  const double dx = order_parameter_dx(p);
  CHECK(dx > 0.0);

  PositionMatrix shifted = p;
  shifted.col(0).array() += 3.7e-6;
  shifted.col(2).array() -= 1.1e-6;
  CHECK(order_parameter_dx(shifted) == doctest::Approx(dx).epsilon(1e-14));

  PositionMatrix mirrored = p;
  mirrored.col(0) = -p.col(0);
  CHECK(order_parameter_dx(mirrored) == doctest::Approx(dx).epsilon(1e-14));

  // Permuting ions changes nothing.
  PositionMatrix permuted = p;
  permuted.row(0) = p.row(6);
  permuted.row(6) = p.row(0);
  CHECK(order_parameter_dx(permuted) == dx);
}

TEST_CASE("a perfect linear chain has zero order parameter") {
  PositionMatrix p = PositionMatrix::Zero(7, 3);
  for (int i = 0; i < 7; ++i) p(i, 2) = (i - 3) * 5e-6;
  CHECK(order_parameter_dx(p) == 0.0);
  CHECK_THROWS_AS(order_parameter_dx(PositionMatrix::Zero(1, 3)),
                  PhysicsError);
}

TEST_CASE("kinetic temperature averages the selected axes") {
  const IonSpecies ca = default_ca40();
  TrajectorySummary sum;
  sum.sample_count = 200;
  sum.mean_positions = PositionMatrix::Zero(2, 3);
  const double v2x = 2.0, v2y = 6.0, v2z = 4.0;  // (m/s)^2
  sum.velocity_second_moments = Eigen::Vector3d(v2x, v2y, v2z);

  const double kb = c::k_boltzmann;
  CHECK(kinetic_temperature(sum, ca) ==
        doctest::Approx(ca.mass * (v2x + v2z) / (2.0 * kb)));
  CHECK(kinetic_temperature(sum, ca, true, true, true) ==
        doctest::Approx(ca.mass * (v2x + v2y + v2z) / (3.0 * kb)));
  CHECK(kinetic_temperature(sum, ca, false, true, false) ==
        doctest::Approx(ca.mass * v2y / kb));
  CHECK_THROWS_AS(kinetic_temperature(sum, ca, false, false, false),
                  PhysicsError);

  sum.sample_count = 99;
  CHECK_THROWS_AS(kinetic_temperature(sum, ca), PhysicsError);
}

TEST_CASE("transition detection finds a synthetic step") {
  std::vector<double> axis;
  for (int i = 0; i <= 40; ++i) axis.push_back(3.0 + 0.01 * i);
  const double x0 = 3.205;
  const auto dx = sigmoid(axis, x0, 0.02, 8e-6);
  const std::vector<double> stds(axis.size(), 1e-8);

  const auto est = detect_transition(axis, dx, stds);
  CHECK(std::abs(est.critical_value - x0) < 0.01);  // within one spacing
  CHECK(est.method == "half-max-crossing/rising");
  CHECK(est.uncertainty > 0.0);
  CHECK(est.uncertainty < 0.05);
}

TEST_CASE("transition detection is equivariant under axis shifts") {
  std::vector<double> axis;
  for (int i = 0; i <= 30; ++i) axis.push_back(0.1 * i);
  const auto dx = sigmoid(axis, 1.4, 0.15, 5e-6);
  const std::vector<double> stds(axis.size(), 1e-8);
  const auto base = detect_transition(axis, dx, stds);

  std::vector<double> shifted = axis;
  for (double& x : shifted) x += 12.5;
  const auto moved = detect_transition(shifted, dx, stds);
  CHECK(moved.critical_value ==
        doctest::Approx(base.critical_value + 12.5).epsilon(1e-12));
  CHECK(moved.uncertainty == doctest::Approx(base.uncertainty));
}

TEST_CASE("flat or noisy curves yield no transition") {
  std::vector<double> axis{1, 2, 3, 4, 5, 6};
  const std::vector<double> flat(axis.size(), 2e-6);
  const std::vector<double> stds(axis.size(), 1e-8);
  CHECK_THROWS_WITH_AS(detect_transition(axis, flat, stds),
                       doctest::Contains("no transition"), PhysicsError);

  // A real step drowned in noise is also rejected.
  const auto dx = sigmoid(axis, 3.5, 0.2, 1e-6);
  const std::vector<double> loud(axis.size(), 1e-6);
  CHECK_THROWS_AS(detect_transition(axis, dx, loud), PhysicsError);
}

TEST_CASE("transition inputs are validated") {
  const std::vector<double> axis{1, 2, 3, 4, 5};
  const std::vector<double> dx{0, 0, 1, 1, 1};
  const std::vector<double> stds(5, 1e-3);
  CHECK_THROWS_AS(detect_transition({1, 2, 3}, {0, 1, 1}, {0, 0, 0}),
                  PhysicsError);
  CHECK_THROWS_AS(detect_transition(axis, {0, 0, 1}, stds), PhysicsError);
  CHECK_THROWS_AS(detect_transition({1, 2, 2, 4, 5}, dx, stds), PhysicsError);
}

TEST_CASE("edge detection brackets an interior window") {
  std::vector<double> axis;
  for (int i = 0; i <= 60; ++i) axis.push_back(-120.0 + 2.0 * i);
  // Plateau between a rise at -84 and a fall at -5.
  std::vector<double> dx;
  for (double x : axis)
    dx.push_back(8e-6 * (1.0 / (1.0 + std::exp(-(x + 84.0) / 2.0))) *
                 (1.0 / (1.0 + std::exp((x + 5.0) / 2.0))));
  const std::vector<double> stds(axis.size(), 5e-8);

  const auto edges = detect_edges(axis, dx, stds);
  REQUIRE(edges.rising.has_value());
  REQUIRE(edges.falling.has_value());
  CHECK(std::abs(edges.rising->critical_value - (-84.0)) < 4.0);
  CHECK(std::abs(edges.falling->critical_value - (-5.0)) < 4.0);
  CHECK(edges.rising->critical_value < edges.falling->critical_value);
}

TEST_CASE("one-sided sweeps report only the matching edge") {
  std::vector<double> axis;
  for (int i = 0; i <= 30; ++i) axis.push_back(3.0 + 0.01 * i);
  const auto dx = sigmoid(axis, 3.15, 0.02, 8e-6);
  const std::vector<double> stds(axis.size(), 1e-8);
  const auto edges = detect_edges(axis, dx, stds);
  CHECK(edges.rising.has_value());
  CHECK(!edges.falling.has_value());
}

TEST_CASE("least squares reproduces an exact line") {
  std::vector<double> xs, ys;
  for (int i = 0; i < 12; ++i) {
    xs.push_back(3.2 + 0.01 * i);
    ys.push_back(-189.0 * xs.back() + 629.0);
  }
  const auto fit = linear_fit(xs, ys);
  CHECK(fit.slope == doctest::Approx(-189.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(629.0).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("least squares residuals are orthogonal to the regressor") {
  Rng rng(23);
  std::vector<double> xs, ys;
  for (int i = 0; i < 40; ++i) {
    xs.push_back(0.1 * i);
    ys.push_back(2.0 * xs.back() - 1.0 + 0.3 * rng.gaussian());
  }
  const auto fit = linear_fit(xs, ys);
  double dot = 0.0, mean = 0.0, yscale = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - fit.slope * xs[i] - fit.intercept;
    dot += r * xs[i];
    mean += r;
    yscale += std::abs(ys[i]);
  }
  CHECK(std::abs(dot) <= 1e-10 * yscale);
  CHECK(std::abs(mean) <= 1e-10 * yscale);
  CHECK(fit.r_squared > 0.9);
  CHECK(fit.r_squared < 1.0);

  CHECK_THROWS_AS(linear_fit({1.0}, {2.0}), PhysicsError);
  CHECK_THROWS_AS(linear_fit({2.0, 2.0, 2.0}, {1.0, 2.0, 3.0}), PhysicsError);
}

TEST_CASE("reported critical lines are mutually consistent") {
  // The T_c(alpha) line evaluated at the operating anisotropy lands on the
  // reported critical temperature, inside the observed temperature range.
  const double t_c = -189.0 * 3.205 + 629.0;  // mK
  CHECK(t_c == doctest::Approx(23.3).epsilon(0.02));
  CHECK(t_c > 10.0);
  CHECK(t_c < 65.0);
  // The bath-intensity line at the zero-heating transition point stays
  // positive and small, consistent with a near-zero intrinsic bath.
  const double e_e = -176.3 * 3.279 + 591.0;  // mu0
  CHECK(e_e == doctest::Approx(12.9).epsilon(0.02));
  CHECK(e_e > 0.0);
}

TEST_CASE("bath calibration inverts a synthetic monotone map") {
  // Ground truth: alpha_c = 3.30 - 0.004 * (E_e / mu0).
  auto estimator = [](double e_e) {
    return TransitionEstimate{3.30 - 0.004 * (e_e / c::mu0),
                              "half-max-crossing/rising", 0.002};
  };
  std::vector<double> grid;
  for (double u : {5.0, 9.0, 13.0, 17.0, 21.0}) grid.push_back(u * c::mu0);

  const double true_e_e = 13.0 * c::mu0;
  const double measured_alpha_c = 3.30 - 0.004 * 13.0;
  const auto result = calibrate_bath(measured_alpha_c, estimator, grid);

  CHECK(result.e_e == doctest::Approx(true_e_e).epsilon(1e-9));
  CHECK(std::abs(result.e_e - true_e_e) <= result.uncertainty);
  CHECK(result.fit.slope < 0.0);
  CHECK(result.fit.r_squared == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(result.map_e_e.size() == grid.size());

  // Out-of-range measured alpha_c is refused, not extrapolated.
  CHECK_THROWS_AS(calibrate_bath(3.5, estimator, grid),
                  CalibrationRangeError);
  CHECK_THROWS_AS(calibrate_bath(measured_alpha_c, estimator, {}),
                  PhysicsError);
}

TEST_CASE("rendering centers a point source on its true pixel") {
  PositionMatrix p = PositionMatrix::Zero(1, 3);
  p(0, 0) = 4.0e-6;   // x -> vertical
  p(0, 2) = -12.0e-6; // z -> horizontal
  ImageOptions opt;
  const auto grid = render_image({p}, opt);

  double total = 0.0, cx = 0.0, cy = 0.0;
  for (int y = 0; y < grid.height; ++y)
    for (int x = 0; x < grid.width; ++x) {
      const double v = grid.count(x, y);
      total += v;
      cx += v * (x + 0.5);
      cy += v * (y + 0.5);
    }
  cx /= total;
  cy /= total;
  const double ex = p(0, 2) / opt.pixel_pitch + 0.5 * opt.width;
  const double ey = p(0, 0) / opt.pixel_pitch + 0.5 * opt.height;
  CHECK(std::abs(cx - ex) < 0.6);  // binning quantizes to one pixel
  CHECK(std::abs(cy - ey) < 0.6);
  CHECK(total == doctest::Approx(opt.photon_budget_per_ion).epsilon(1e-9));
}

TEST_CASE("rendered flux equals the photon budget and scales with it") {
  Rng rng(5);
  std::vector<PositionMatrix> samples;
  for (int k = 0; k < 50; ++k) {
    PositionMatrix p = random_positions(7, 3e-6, rng);
    samples.push_back(p);
  }
  ImageOptions opt;
  const auto grid = render_image(samples, opt);
  double total = 0.0, negative = 0.0;
  for (double v : grid.intensities) {
    total += v;
    negative = std::min(negative, v);
  }
  CHECK(negative >= 0.0);
  CHECK(total == doctest::Approx(7.0 * opt.photon_budget_per_ion).epsilon(1e-9));

  ImageOptions doubled = opt;
  doubled.photon_budget_per_ion *= 2.0;
  const auto grid2 = render_image(samples, doubled);
  const double total2 =
      std::accumulate(grid2.intensities.begin(), grid2.intensities.end(), 0.0);
  CHECK(total2 == doctest::Approx(2.0 * total).epsilon(1e-9));

  CHECK_THROWS_AS(render_image({}, opt), PhysicsError);
}

TEST_CASE("a zigzag sample renders as two separated rows") {
  // Two rows at x = +-4 um (three pixels either side of the midline),
  // extended along z.
  const double row_x = 4.0e-6;
  std::vector<PositionMatrix> samples;
  PositionMatrix p(6, 3);
  for (int i = 0; i < 6; ++i) {
    p(i, 0) = (i % 2 == 0) ? row_x : -row_x;
    p(i, 1) = 0.0;
    p(i, 2) = (i - 2.5) * 5e-6;
  }
  samples.push_back(p);
  ImageOptions opt;
  const auto grid = render_image(samples, opt);

  // Vertical marginal: the two row bands must dominate the midline valley.
  std::vector<double> marginal(grid.height, 0.0);
  for (int y = 0; y < grid.height; ++y)
    for (int x = 0; x < grid.width; ++x) marginal[y] += grid.count(x, y);
  const int mid = grid.height / 2;
  const int upper = (int)std::floor(row_x / opt.pixel_pitch + mid);
  const int lower = (int)std::floor(-row_x / opt.pixel_pitch + mid);
  CHECK(marginal[upper] > 3.0 * marginal[mid]);
  CHECK(marginal[lower] > 3.0 * marginal[mid]);
}

TEST_CASE("PGM output carries the geometry sidecar") {
  PositionMatrix p = PositionMatrix::Zero(2, 3);
  p(0, 2) = -5e-6;
  p(1, 2) = 5e-6;
  ImageOptions opt;
  const auto grid = render_image({p}, opt);
  const std::string path = "/tmp/iontrap_test_image.pgm";
  write_pgm(grid, path, "note = unit-test");

  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::string magic;
  int w, h, maxval;
  in >> magic >> w >> h >> maxval;
  CHECK(magic == "P5");
  CHECK(w == opt.width);
  CHECK(h == opt.height);
  CHECK(maxval == 255);
  in.get();  // single whitespace after the header
  std::vector<unsigned char> pix(w * h);
  in.read((char*)pix.data(), pix.size());
  CHECK(in.gcount() == (std::streamsize)pix.size());
  int peak = 0;
  for (unsigned char v : pix) peak = std::max(peak, (int)v);
  CHECK(peak == 255);  // peak-normalized

  std::ifstream side(path + ".txt");
  REQUIRE(side.good());
  std::string text((std::istreambuf_iterator<char>(side)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("pixel_pitch_um") != std::string::npos);
  CHECK(text.find("scale_bar_um = 20") != std::string::npos);
  CHECK(text.find("note = unit-test") != std::string::npos);
  std::remove(path.c_str());
  std::remove((path + ".txt").c_str());
}
