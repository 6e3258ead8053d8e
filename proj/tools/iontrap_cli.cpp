// Command-line front door: sweeps, phase diagrams, calibration and
// synthetic CCD renders. Progress goes to stderr; stdout carries only
// machine-readable summaries. Exit codes: 0 ok, 2 usage/config error,
// 3 simulation instability, 4 calibration out of range.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/sweep.hpp"

namespace c = iontrap::constants;
using namespace iontrap;

namespace {

std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0)) throw ConfigError("grid step must be positive");
  std::vector<double> g;
  for (double v = lo; v <= hi + 1e-9 * step; v += step) g.push_back(v);
  if (g.size() < 1) throw ConfigError("empty grid");
  return g;
}

ExperimentConfig load_and_validate(const std::string& path, int reps,
                                   bool quick, std::uint64_t seed,
                                   bool seed_set) {
  ExperimentConfig cfg =
      path.empty() ? ExperimentConfig{} : load_config_file(path);
  if (quick && reps <= 0) cfg.repetitions = 10;
  if (reps > 0) cfg.repetitions = reps;
  if (seed_set) cfg.seed = seed;
  return validate(cfg);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear-zigzag phase-transition simulator for small ion "
               "crystals"};
  app.require_subcommand(1);
  app.fallthrough();  // allow global options after the subcommand name

  std::string config_path, out_path, mode_str = "fresh";
  int reps = 0;
  bool quick = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  app.add_option("--config", config_path, "key = value config file");
  app.add_option("--out", out_path, "output path");
  app.add_option("--reps", reps, "repetitions per grid cell");
  app.add_flag("--quick", quick, "quick mode (10 repetitions)");
  auto* seed_opt = app.add_option("--seed", seed, "override RNG seed");

  double d_lo = -120, d_hi = 0, d_step = 5;
  double a_lo = 3.15, a_hi = 3.45, a_step = 0.02;
  double delta_fixed = -30.0;
  double measured_alpha_c = 0.0;
  double render_delta = -40.0;

  auto* sd = app.add_subcommand("sweep-detuning",
                                "dx and T versus the cooling detuning");
  sd->add_option("--delta-min", d_lo, "MHz");
  sd->add_option("--delta-max", d_hi, "MHz");
  sd->add_option("--delta-step", d_step, "MHz");
  sd->add_option("--mode", mode_str, "carried|fresh");

  auto* sa = app.add_subcommand("sweep-alpha",
                                "dx versus the anisotropy at fixed detuning");
  sa->add_option("--alpha-min", a_lo);
  sa->add_option("--alpha-max", a_hi);
  sa->add_option("--alpha-step", a_step);
  sa->add_option("--delta", delta_fixed, "fixed detuning, MHz");
  sa->add_option("--mode", mode_str, "carried|fresh");

  auto* pd = app.add_subcommand("phase-diagram",
                                "full (delta, alpha) grid plus critical locus");
  pd->add_option("--delta-min", d_lo, "MHz");
  pd->add_option("--delta-max", d_hi, "MHz");
  pd->add_option("--delta-step", d_step, "MHz");
  pd->add_option("--alpha-min", a_lo);
  pd->add_option("--alpha-max", a_hi);
  pd->add_option("--alpha-step", a_step);

  auto* cal = app.add_subcommand("calibrate",
                                 "infer E_e from a measured alpha_c");
  cal->add_option("--alpha-c", measured_alpha_c, "measured transition point")
      ->required();
  cal->add_option("--delta", delta_fixed, "fixed detuning, MHz");
  cal->add_option("--alpha-min", a_lo);
  cal->add_option("--alpha-max", a_hi);
  cal->add_option("--alpha-step", a_step);

  auto* rd = app.add_subcommand("render", "synthetic CCD image at one detuning");
  rd->add_option("--delta", render_delta, "MHz");
  double pitch_um = ImageOptions{}.pixel_pitch * 1e6;
  rd->add_option("--pixel-pitch-um", pitch_um,
                 "object-space pixel pitch (smaller = more magnification)");

  auto* cc = app.add_subcommand("cooling-curves",
                                "beta(delta) and T_pred(delta) CSV");
  cc->add_option("--delta-min", d_lo, "MHz");
  cc->add_option("--delta-max", d_hi, "MHz");
  cc->add_option("--delta-step", d_step, "MHz");

  CLI11_PARSE(app, argc, argv);
  seed_set = seed_opt->count() > 0;

  try {
    const ExperimentConfig cfg =
        load_and_validate(config_path, reps, quick, seed, seed_set);
    const SweepMode mode =
        (mode_str == "carried") ? SweepMode::Carried : SweepMode::FreshStart;
    if (mode_str != "carried" && mode_str != "fresh")
      throw ConfigError("--mode must be carried or fresh");

    if (sd->parsed()) {
      const auto deltas = make_grid(d_lo, d_hi, d_step);
      if (deltas.size() < 2) throw ConfigError("empty grid");
      std::cerr << "sweep-detuning: " << deltas.size() << " points x "
                << cfg.repetitions << " reps\n";
      const SweepResult r =
          run_sweep(cfg, deltas, {cfg.alpha}, mode, cfg.repetitions);
      if (!out_path.empty()) write_sweep_csv(r, out_path);
      std::vector<double> means, stds;
      for (size_t id = 0; id < deltas.size(); ++id) {
        means.push_back(r.cell(0, id).dx_mean_um);
        stds.push_back(r.cell(0, id).dx_std_um);
      }
      try {
        const TransitionEdges e = detect_edges(deltas, means, stds);
        if (e.rising)
          std::printf("rising_edge_mhz %.4f +- %.4f\n",
                      e.rising->critical_value, e.rising->uncertainty);
        if (e.falling)
          std::printf("falling_edge_mhz %.4f +- %.4f\n",
                      e.falling->critical_value, e.falling->uncertainty);
      } catch (const PhysicsError& e) {
        std::printf("no_transition %s\n", e.what());
      }
      if (out_path.empty()) std::cout << sweep_to_csv(r);
      return 0;
    }

    if (sa->parsed()) {
      const auto alphas = make_grid(a_lo, a_hi, a_step);
      std::cerr << "sweep-alpha: " << alphas.size() << " points x "
                << cfg.repetitions << " reps at delta = " << delta_fixed
                << " MHz\n";
      const SweepResult r =
          run_sweep(cfg, {delta_fixed}, alphas, mode, cfg.repetitions);
      if (!out_path.empty()) write_sweep_csv(r, out_path);
      if (alphas.size() >= 5) {
        std::vector<double> means, stds;
        for (size_t ia = 0; ia < alphas.size(); ++ia) {
          means.push_back(r.cell(ia, 0).dx_mean_um);
          stds.push_back(r.cell(ia, 0).dx_std_um);
        }
        try {
          const TransitionEstimate t = detect_transition(alphas, means, stds);
          std::printf("alpha_c %.5f +- %.5f (%s)\n", t.critical_value,
                      t.uncertainty, t.method.c_str());
        } catch (const PhysicsError& e) {
          std::printf("no_transition %s\n", e.what());
        }
      }
      if (out_path.empty()) std::cout << sweep_to_csv(r);
      return 0;
    }

    if (pd->parsed()) {
      const auto deltas = make_grid(d_lo, d_hi, d_step);
      const auto alphas = make_grid(a_lo, a_hi, a_step);
      if (deltas.size() < 2 || alphas.size() < 2)
        throw ConfigError("empty grid");
      std::cerr << "phase-diagram: " << deltas.size() << " x " << alphas.size()
                << " cells x " << cfg.repetitions << " reps\n";
      const SweepResult r =
          run_sweep(cfg, deltas, alphas, SweepMode::FreshStart,
                    cfg.repetitions);
      const auto locus = critical_locus(r);
      if (!out_path.empty()) {
        write_sweep_csv(r, out_path);
        write_text(out_path + ".locus.csv", locus_to_csv(locus));
      } else {
        std::cout << sweep_to_csv(r) << locus_to_csv(locus);
      }
      return 0;
    }

    if (cal->parsed()) {
      const auto alphas = make_grid(a_lo, a_hi, a_step);
      std::vector<double> ee_grid;
      for (double ee : {7.0, 10.0, 13.0, 16.0, 19.0})
        ee_grid.push_back(ee * c::mu0);
      std::cerr << "calibrate: building E_e -> alpha_c map at delta = "
                << delta_fixed << " MHz\n";
      auto estimator = [&](double e_e) {
        ExperimentConfig cc = cfg;
        cc.e_e_over_mu0 = e_e / c::mu0;
        std::cerr << "  E_e = " << cc.e_e_over_mu0 << " mu0\n";
        return estimate_alpha_c(cc, delta_fixed, alphas, cfg.repetitions);
      };
      const CalibrationResult cr =
          calibrate_bath(measured_alpha_c, estimator, ee_grid);
      std::printf("e_e_over_mu0 %.4f +- %.4f\n", cr.e_e / c::mu0,
                  cr.uncertainty / c::mu0);
      std::printf("fit_line e_e/mu0 = %.4f * alpha_c + %.4f (r2 = %.5f)\n",
                  cr.fit.slope / c::mu0, cr.fit.intercept / c::mu0,
                  cr.fit.r_squared);
      for (size_t i = 0; i < cr.map_e_e.size(); ++i)
        std::printf("map %.4f %.5f\n", cr.map_e_e[i] / c::mu0,
                    cr.map_alpha_c[i]);
      return 0;
    }

    if (rd->parsed()) {
      if (out_path.empty()) throw ConfigError("render requires --out");
      {
        std::ofstream probe(out_path, std::ios::binary | std::ios::app);
        if (!probe) throw ConfigError("cannot open output file '" + out_path +
                                      "'");
      }
      LaserParams lasers = cfg.lasers();
      lasers.delta_397 = render_delta * c::mhz_to_angular;
      CoolingCache cache;
      Rng rng = stream_for(cfg.seed, 0, 0);
      const TrajectorySummary sum = run_trajectory(
          cfg, {{lasers, cfg.n_burn_in + cfg.n_steps}}, rng, cache, true);
      ImageOptions img_opts;
      img_opts.pixel_pitch = pitch_um * 1e-6;
      const ImageGrid img = render_image(sum.position_samples, img_opts);
      write_pgm(img, out_path,
                "config_hash = " + config_hash(cfg) +
                    "\ndelta_mhz = " + std::to_string(render_delta));
      std::printf("image %s (%d x %d)\n", out_path.c_str(), img.width,
                  img.height);
      return 0;
    }

    if (cc->parsed()) {
      const auto deltas = make_grid(d_lo, d_hi, d_step);
      const std::string csv = cooling_curves_csv(cfg, deltas);
      if (!out_path.empty())
        write_text(out_path, csv);
      else
        std::cout << csv;
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InstabilityError& e) {
    std::cerr << "simulation instability: " << e.what() << "\n";
    return 3;
  } catch (const CalibrationRangeError& e) {
    std::cerr << "calibration error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
