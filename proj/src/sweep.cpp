#include "iontrap/sweep.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

namespace c = constants;

int resolve_worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("IONTRAP_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? (int)hw : 1;
}

namespace {

void check_monotone(const std::vector<double>& grid, const char* name) {
  if (grid.empty()) throw ConfigError(std::string(name) + ": empty grid");
  for (size_t i = 0; i + 1 < grid.size(); ++i)
    if (!(grid[i + 1] > grid[i]) && !(grid[i + 1] < grid[i]))
      throw ConfigError(std::string(name) + ": grid not strictly monotone");
  const bool up = grid.size() < 2 || grid[1] > grid[0];
  for (size_t i = 0; i + 1 < grid.size(); ++i)
    if ((grid[i + 1] > grid[i]) != up)
      throw ConfigError(std::string(name) + ": grid not strictly monotone");
}

// Runs tasks 0..n-1 on a small pool; each task writes only its own slot, so
// the outcome is schedule-independent. The first exception is rethrown.
void run_tasks(long n_tasks, int workers,
               const std::function<void(long)>& task) {
  if (workers <= 1) {
    for (long t = 0; t < n_tasks; ++t) task(t);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const long t = next.fetch_add(1);
      if (t >= n_tasks) return;
      try {
        task(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct RepResult {
  double dx = 0.0;     // m
  double t_kin = 0.0;  // K
};

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1));
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& raw_cfg,
                      const std::vector<double>& deltas_mhz,
                      const std::vector<double>& alphas, SweepMode mode,
                      int reps, int workers) {
  check_monotone(deltas_mhz, "delta grid");
  check_monotone(alphas, "alpha grid");
  const ExperimentConfig cfg = validate(raw_cfg);
  const int n_reps = reps > 0 ? reps : cfg.repetitions;
  workers = resolve_worker_count(workers);

  const size_t nd = deltas_mhz.size();
  const size_t na = alphas.size();
  const IonSpecies species = cfg.species();
  const BathParams bath = cfg.bath();
  CoolingCache cache;

  SweepResult result;
  result.delta_mhz = deltas_mhz;
  result.alpha = alphas;
  result.cells.resize(na * nd);
  result.config_hash = config_hash(cfg);
  result.seed = cfg.seed;

  // forward[pass 0] always exists; pass 1 is the reverse carried pass.
  const int n_passes = (mode == SweepMode::Carried) ? 2 : 1;
  std::vector<RepResult> rep_results(na * nd * n_reps * n_passes);
  auto slot = [&](size_t ia, size_t id, int rep, int pass) -> RepResult& {
    return rep_results[((ia * nd + id) * n_reps + rep) * n_passes + pass];
  };

  if (mode == SweepMode::FreshStart) {
    const long n_tasks = (long)(na * nd) * n_reps;
    run_tasks(n_tasks, workers, [&](long t) {
      const int rep = (int)(t % n_reps);
      const size_t cell = (size_t)(t / n_reps);
      const size_t ia = cell / nd;
      const size_t id = cell % nd;
      ExperimentConfig cc = cfg;
      cc.alpha = alphas[ia];
      Rng rng = stream_for(cfg.seed, cell, (std::uint64_t)rep);
      try {
        auto summaries = quasi_static_sweep(
            cc, {deltas_mhz[id] * c::mhz_to_angular}, SweepMode::FreshStart,
            rng, cache);
        slot(ia, id, rep, 0) = RepResult{
            order_parameter_dx(summaries[0]),
            kinetic_temperature(summaries[0], species)};
      } catch (const InstabilityError& e) {
        throw InstabilityError("cell (delta=" +
                               std::to_string(deltas_mhz[id]) + " MHz, alpha=" +
                               std::to_string(alphas[ia]) + ", rep " +
                               std::to_string(rep) + "): " + e.what());
      }
    });
  } else {
    // Carried: a repetition walks the whole delta row sequentially, in the
    // given order (pass 0) and reversed (pass 1).
    const long n_tasks = (long)na * n_reps * 2;
    run_tasks(n_tasks, workers, [&](long t) {
      const int pass = (int)(t % 2);
      const int rep = (int)((t / 2) % n_reps);
      const size_t ia = (size_t)(t / (2 * n_reps));
      ExperimentConfig cc = cfg;
      cc.alpha = alphas[ia];

      const TrapParams trap = cc.trap();
      LangevinIntegrator integrator(species, trap, cc.dt_s);
      CrystalState state = make_chain_state(cc.n_ions, trap, species);
      for (size_t k = 0; k < nd; ++k) {
        const size_t id = (pass == 0) ? k : nd - 1 - k;
        const size_t cell = ia * nd + id;
        Rng rng = stream_for(cfg.seed ^ (pass ? 0x517cc1b727220a95ULL : 0),
                             cell, (std::uint64_t)rep);
        LaserParams lasers = cc.lasers();
        lasers.delta_397 = deltas_mhz[id] * c::mhz_to_angular;
        integrator.set_noise(NoiseModel::from_cooling(
            cache.get(species, lasers, bath), bath, species));
        SegmentOptions opts;
        opts.n_burn_in = cc.n_burn_in;
        opts.n_sample = cc.n_steps;
        opts.stride = cc.sample_stride;
        try {
          const TrajectorySummary sum =
              run_segment(integrator, state, opts, rng);
          slot(ia, id, rep, pass) =
              RepResult{order_parameter_dx(sum),
                        kinetic_temperature(sum, species)};
        } catch (const InstabilityError& e) {
          throw InstabilityError(
              "cell (delta=" + std::to_string(deltas_mhz[id]) +
              " MHz, alpha=" + std::to_string(alphas[ia]) + ", rep " +
              std::to_string(rep) + "): " + e.what());
        }
      }
    });
  }

  for (size_t ia = 0; ia < na; ++ia) {
    ExperimentConfig cc = cfg;
    cc.alpha = alphas[ia];
    for (size_t id = 0; id < nd; ++id) {
      std::vector<double> dx, tk, dx_rev;
      for (int rep = 0; rep < n_reps; ++rep) {
        dx.push_back(slot(ia, id, rep, 0).dx);
        tk.push_back(slot(ia, id, rep, 0).t_kin);
        if (n_passes == 2) dx_rev.push_back(slot(ia, id, rep, 1).dx);
      }
      CellStats& cs = result.cell(ia, id);
      cs.dx_mean_um = mean(dx) * 1e6;
      cs.dx_std_um = sample_std(dx) * 1e6;
      cs.t_kin_mk = mean(tk) * 1e3;
      cs.n_reps = n_reps;

      LaserParams lasers = cc.lasers();
      lasers.delta_397 = deltas_mhz[id] * c::mhz_to_angular;
      cs.t_pred_mk =
          cache.get(species, lasers, bath).t_pred * 1e3;

      if (n_passes == 2) {
        const double sem =
            (sample_std(dx) + sample_std(dx_rev)) / std::sqrt((double)n_reps);
        cs.hysteresis =
            std::abs(mean(dx) - mean(dx_rev)) * 1e6 >
            std::max(2.0 * sem * 1e6, 0.05 * std::abs(cs.dx_mean_um));
      }
    }
  }
  return result;
}

TransitionEstimate estimate_alpha_c(const ExperimentConfig& cfg,
                                    double delta_mhz,
                                    const std::vector<double>& alphas,
                                    int reps, int workers) {
  const SweepResult r =
      run_sweep(cfg, {delta_mhz}, alphas, SweepMode::FreshStart, reps, workers);
  std::vector<double> means, errs;
  for (size_t ia = 0; ia < alphas.size(); ++ia) {
    const CellStats& cs = r.cell(ia, 0);
    means.push_back(cs.dx_mean_um);
    // Noise of the averaged curve: standard error, not rep dispersion.
    errs.push_back(cs.dx_std_um / std::sqrt(std::max(cs.n_reps, 1)));
  }
  // The logistic fit pools the whole curve and is markedly less noisy than
  // a single half-max crossing; fall back to the crossing when the curve is
  // too irregular for the sigmoid model.
  try {
    return fit_transition(alphas, means, errs);
  } catch (const PhysicsError&) {
    return detect_transition(alphas, means, errs);
  }
}

std::vector<LocusRow> critical_locus(const SweepResult& result) {
  std::vector<LocusRow> rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (size_t ia = 0; ia < result.alpha.size(); ++ia) {
    LocusRow row{result.alpha[ia], nan, nan, nan, nan, nan};
    std::vector<double> means, errs, tkin;
    for (size_t id = 0; id < result.delta_mhz.size(); ++id) {
      const CellStats& cs = result.cell(ia, id);
      means.push_back(cs.dx_mean_um);
      // Noise of the averaged curve: standard error, not rep dispersion.
      errs.push_back(cs.dx_std_um / std::sqrt(std::max(cs.n_reps, 1)));
      tkin.push_back(cs.t_kin_mk);
    }
    try {
      const TransitionEdges edges =
          detect_edges(result.delta_mhz, means, errs);
      if (edges.rising) {
        row.delta_rise_mhz = edges.rising->critical_value;
        row.delta_rise_unc_mhz = edges.rising->uncertainty;
        // Kinetic temperature linearly interpolated at the edge.
        for (size_t id = 0; id + 1 < result.delta_mhz.size(); ++id) {
          const double a = result.delta_mhz[id], b = result.delta_mhz[id + 1];
          if (row.delta_rise_mhz >= a && row.delta_rise_mhz <= b) {
            const double f = (row.delta_rise_mhz - a) / (b - a);
            row.t_c_mk = (1 - f) * tkin[id] + f * tkin[id + 1];
            break;
          }
        }
      }
      if (edges.falling) {
        row.delta_fall_mhz = edges.falling->critical_value;
        row.delta_fall_unc_mhz = edges.falling->uncertainty;
      }
    } catch (const PhysicsError&) {
      // no transition at this alpha; leave NaNs
    }
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string sweep_to_csv(const SweepResult& result) {
  std::string out;
  out += "# config_hash=" + result.config_hash +
         " seed=" + std::to_string(result.seed) + "\n";
  out += "delta_mhz,alpha,dx_mean_um,dx_std_um,t_pred_mk,t_kin_mk,n_reps,"
         "hysteresis\n";
  for (size_t ia = 0; ia < result.alpha.size(); ++ia)
    for (size_t id = 0; id < result.delta_mhz.size(); ++id) {
      const CellStats& cs = result.cell(ia, id);
      out += fmt(result.delta_mhz[id]) + "," + fmt(result.alpha[ia]) + "," +
             fmt(cs.dx_mean_um) + "," + fmt(cs.dx_std_um) + "," +
             fmt(cs.t_pred_mk) + "," + fmt(cs.t_kin_mk) + "," +
             std::to_string(cs.n_reps) + "," +
             (cs.hysteresis ? "1" : "0") + "\n";
    }
  return out;
}

SweepResult sweep_from_csv(const std::string& csv) {
  SweepResult result;
  std::istringstream in(csv);
  std::string line;
  std::vector<std::array<double, 8>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto hpos = line.find("config_hash=");
      auto spos = line.find("seed=");
      if (hpos != std::string::npos)
        result.config_hash =
            line.substr(hpos + 12, line.find(' ', hpos + 12) - hpos - 12);
      if (spos != std::string::npos)
        result.seed = std::strtoull(line.c_str() + spos + 5, nullptr, 10);
      continue;
    }
    if (line.rfind("delta_mhz,", 0) == 0) continue;  // header
    std::array<double, 8> row{};
    std::istringstream ls(line);
    std::string tok;
    for (int k = 0; k < 8; ++k) {
      if (!std::getline(ls, tok, ','))
        throw ConfigError("sweep_from_csv: short row '" + line + "'");
      row[k] = std::strtod(tok.c_str(), nullptr);
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw ConfigError("sweep_from_csv: no data rows");

  for (const auto& r : rows) {
    if (result.alpha.empty() || result.alpha.back() != r[1])
      if (std::find(result.alpha.begin(), result.alpha.end(), r[1]) ==
          result.alpha.end())
        result.alpha.push_back(r[1]);
    if (std::find(result.delta_mhz.begin(), result.delta_mhz.end(), r[0]) ==
        result.delta_mhz.end())
      result.delta_mhz.push_back(r[0]);
  }
  if (rows.size() != result.alpha.size() * result.delta_mhz.size())
    throw ConfigError("sweep_from_csv: row count does not match grid");
  result.cells.resize(rows.size());
  for (size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    CellStats cs;
    cs.dx_mean_um = r[2];
    cs.dx_std_um = r[3];
    cs.t_pred_mk = r[4];
    cs.t_kin_mk = r[5];
    cs.n_reps = (int)std::lround(r[6]);
    cs.hysteresis = r[7] != 0.0;
    const size_t ia = k / result.delta_mhz.size();
    const size_t id = k % result.delta_mhz.size();
    result.cell(ia, id) = cs;
  }
  return result;
}

void write_sweep_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  out << sweep_to_csv(result);
}

std::string locus_to_csv(const std::vector<LocusRow>& rows) {
  std::string out =
      "alpha,delta_rise_mhz,delta_rise_unc_mhz,delta_fall_mhz,"
      "delta_fall_unc_mhz,t_c_mk\n";
  for (const auto& r : rows)
    out += fmt(r.alpha) + "," + fmt(r.delta_rise_mhz) + "," +
           fmt(r.delta_rise_unc_mhz) + "," + fmt(r.delta_fall_mhz) + "," +
           fmt(r.delta_fall_unc_mhz) + "," + fmt(r.t_c_mk) + "\n";
  return out;
}

std::string cooling_curves_csv(const ExperimentConfig& raw_cfg,
                               const std::vector<double>& deltas_mhz) {
  const ExperimentConfig cfg = validate(raw_cfg);
  const IonSpecies species = cfg.species();
  const BathParams bath = cfg.bath();
  std::string out = "delta_mhz,beta_over_beta0,t_pred_mk\n";
  for (double d : deltas_mhz) {
    LaserParams lasers = cfg.lasers();
    lasers.delta_397 = d * c::mhz_to_angular;
    const CoolingResponse r = cooling_response(species, lasers, bath);
    out += fmt(d) + "," + fmt(r.beta_beam / c::beta0) + "," +
           fmt(r.t_pred * 1e3) + "\n";
  }
  return out;
}

}  // namespace iontrap
